"""Planar and projective geometry for rotated boxes.

The hot kernels (convex hull, convex clipping, polygon area and the
minimum-area rectangle) come from the compiled ``_ckernels`` extension when
it is importable, otherwise from ``_pykernels``. Set ``AFFORDKIT_KERNELS=python``
to force the fallback. :data:`BACKEND` names the active implementation.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..core import Intrinsics, JointAxis, RotatedBox2D, canonicalize_box
from ..errors import AffordkitError
from . import _pykernels

if os.environ.get("AFFORDKIT_KERNELS", "").lower() == "python":
    _kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _kernels

        BACKEND = "cython"
    except ImportError:
        _kernels = _pykernels
        BACKEND = "python"

MIN_DEPTH = 1e-6
COLLINEAR_TOL = 1e-12  # rectangle area relative to the squared extent

__all__ = [
    "BACKEND",
    "AxisAlignedBox",
    "BehindCamera",
    "Degenerate",
    "Intrinsics",
    "NonConvexInput",
    "Polygon2D",
    "convex_hull",
    "min_area_rotated_rect",
    "polygon_intersection",
    "project_axis",
    "project_points",
    "rotated_iou",
    "to_axis_aligned",
    "use_backend",
]


class BehindCamera(AffordkitError):
    def __init__(self, index: int, z: float):
        super().__init__(f"point {index} has z={z} <= {MIN_DEPTH}")
        self.index = index


class Degenerate(AffordkitError):
    pass


class NonConvexInput(AffordkitError):
    pass


def use_backend(name: str) -> None:
    """Switch kernels at runtime (``"cython"`` or ``"python"``); for tests and benchmarks."""
    global _kernels, BACKEND
    if name == "python":
        _kernels, BACKEND = _pykernels, "python"
    elif name == "cython":
        from . import _ckernels

        _kernels, BACKEND = _ckernels, "cython"
    else:
        raise ValueError(name)


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


@dataclass(frozen=True)
class Polygon2D:
    """Simple polygon with vertices in counter-clockwise (positive area) order."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise Degenerate("a polygon needs at least 3 vertices")
        if _kernels.polygon_area(verts) < 0:
            verts = verts[::-1]
        object.__setattr__(self, "vertices", verts)

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    @property
    def area(self) -> float:
        return abs(_kernels.polygon_area(self.as_array()))

    def is_convex(self) -> bool:
        return _is_convex(self.as_array())

    def contains(self, point, tol: float = 1e-9) -> bool:
        v = self.as_array()
        p = np.asarray(point, dtype=float)
        n = len(v)
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            e = b - a
            if e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0]) < -tol * max(1.0, math.hypot(*e)):
                return False
        return True


class AxisAlignedBox(NamedTuple):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


def _is_convex(v: np.ndarray) -> bool:
    n = len(v)
    if n < 3:
        return False
    sign = 0
    scale = float(np.abs(v).max()) or 1.0
    eps = 1e-12 * scale * scale
    for i in range(n):
        a, b, c = v[i], v[(i + 1) % n], v[(i + 2) % n]
        cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cr) <= eps:
            continue
        s = 1 if cr > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return sign != 0


def project_points(points, intrinsics: Intrinsics) -> np.ndarray:
    """Pinhole projection of (n, 3) camera-frame points to (n, 2) pixels."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    bad = np.nonzero(pts[:, 2] <= MIN_DEPTH)[0]
    if len(bad):
        i = int(bad[0])
        raise BehindCamera(i, float(pts[i, 2]))
    z = pts[:, 2]
    u = intrinsics.fx * pts[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * pts[:, 1] / z + intrinsics.cy
    return np.column_stack([u, v])


def project_axis(axis: JointAxis, intrinsics: Intrinsics) -> tuple[tuple[float, float], tuple[float, float]]:
    uv = project_points([axis.p0, axis.p1], intrinsics)
    return (tuple(map(float, uv[0])), tuple(map(float, uv[1])))


def convex_hull(points) -> Polygon2D:
    hull = _kernels.convex_hull(points)
    if len(hull) < 3:
        raise Degenerate("fewer than 3 distinct non-collinear points")
    return Polygon2D(tuple(map(tuple, hull)))


def min_area_rotated_rect(points) -> RotatedBox2D:
    """Smallest-area rectangle enclosing ``points``.

    Among equal-area candidates the one whose edge angle modulo 90 degrees is
    smallest wins. Collinear input yields a zero-height box flagged
    ``degenerate=True``; fewer than two distinct points raise
    :class:`Degenerate`.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    hull = _kernels.convex_hull(pts)
    if len(hull) < 2:
        raise Degenerate("fewer than 2 distinct points")
    if len(hull) == 2:
        a, b = hull
        start, end = sorted([tuple(a), tuple(b)], key=lambda p: (p[1], p[0]))
        return RotatedBox2D((start, end, end, start), degenerate=True)
    corners, area = _kernels.min_area_rect(hull)
    span = float(np.ptp(hull, axis=0).max())
    if area <= COLLINEAR_TOL * span * span:
        # numerically collinear hull: report the flat box along its extent
        d = hull - hull.mean(axis=0)
        axis = np.linalg.svd(d, full_matrices=False)[2][0]
        s = d @ axis
        a, b = hull[int(np.argmin(s))], hull[int(np.argmax(s))]
        start, end = sorted([tuple(map(float, a)), tuple(map(float, b))], key=lambda p: (p[1], p[0]))
        return RotatedBox2D((start, end, end, start), degenerate=True)
    return canonicalize_box(corners)


def polygon_intersection(a: Polygon2D, b: Polygon2D) -> Polygon2D | None:
    """Intersection of two convex polygons, or ``None`` when it has no area."""
    va, vb = a.as_array(), b.as_array()
    if not _is_convex(va) or not _is_convex(vb):
        raise NonConvexInput("polygon_intersection requires convex polygons")
    clipped = _kernels.clip_convex(va, vb)
    if len(clipped) < 3 or _kernels.polygon_area(clipped) <= 0:
        return None
    return Polygon2D(tuple(map(tuple, clipped)))


def _ccw(v: np.ndarray) -> np.ndarray:
    return v[::-1].copy() if _kernels.polygon_area(v) < 0 else v


def intersection_area(a: RotatedBox2D, b: RotatedBox2D) -> float:
    va, vb = _ccw(a.as_array()), _ccw(b.as_array())
    clipped = _kernels.clip_convex(va, vb)
    if len(clipped) < 3:
        return 0.0
    return max(0.0, _kernels.polygon_area(clipped))


def rotated_iou(a: RotatedBox2D, b: RotatedBox2D) -> float:
    """Intersection over union of two rotated boxes; 0 if either is degenerate."""
    if a.degenerate or b.degenerate:
        return 0.0
    area_a, area_b = a.area, b.area
    if area_a <= 0 or area_b <= 0:
        return 0.0
    if set(a.vertices) == set(b.vertices):
        return 1.0
    inter = intersection_area(a, b)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return float(min(1.0, max(0.0, inter / union)))


def to_axis_aligned(box: RotatedBox2D) -> AxisAlignedBox:
    v = box.as_array()
    lo, hi = v.min(axis=0), v.max(axis=0)
    return AxisAlignedBox(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def box_from_center(center: Sequence[float], width: float, height: float, angle_deg: float) -> RotatedBox2D:
    """Rectangle of given size rotated by ``angle_deg`` about its center."""
    t = math.radians(angle_deg)
    c, s = math.cos(t), math.sin(t)
    hw, hh = width / 2.0, height / 2.0
    cx, cy = center
    pts = [(cx + c * dx - s * dy, cy + s * dx + c * dy) for dx, dy in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh))]
    return canonicalize_box(pts)


def transform_box(box: RotatedBox2D, angle_deg: float = 0.0, shift=(0.0, 0.0), pivot=None) -> RotatedBox2D:
    """Rigidly rotate a box about ``pivot`` (default its center) then translate."""
    v = box.as_array()
    p = np.asarray(box.center if pivot is None else pivot, dtype=float)
    t = math.radians(angle_deg)
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    out = (v - p) @ R.T + p + np.asarray(shift, dtype=float)
    return canonicalize_box(out)
