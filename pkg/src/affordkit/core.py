"""Domain types for per-part manipulation labels and the JSONL dataset format.

Every part of an observed object is described by one :class:`PartAnnotation`
holding its pose or joint axis, three rotated boxes (part, grasp region,
functional region), a manipulation type and a free-text description.

Conventions
-----------
* 3D quantities live in the camera frame: +x right, +y down, +z forward.
* Image coordinates are pixels with y pointing down.
* :class:`RotatedBox2D` vertices are stored counter-clockwise *as seen on
  screen*. Because y points down, the raw shoelace sum of a canonical box is
  negative. The first vertex is the one with the smallest ``(y, x)``.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import AffordkitError

RECT_LENGTH_TOL = 1e-3  # px
RECT_ANGLE_TOL = 1e-3  # rad
ROTATION_TOL = 1e-6
MIN_AXIS_LENGTH = 1e-6  # m
VIEWPORT_MARGIN = 0.25  # fraction of image size tolerated off-screen
DEFAULT_IMAGE_SIZE = 448


class NotARectangle(AffordkitError):
    """Four points that do not form a rectangle within tolerance."""


class ManipulationType(str, Enum):
    BOTTLE_CAP = "bottle_cap"
    REVOLUTE_PART = "revolute_part"
    SLIDING_LID = "sliding_lid"
    PRISMATIC_PART = "prismatic_part"
    FREEDOM_OBJECT = "freedom_object"

    @property
    def label(self) -> str:
        """Human-readable name used in VQA text, e.g. ``"bottle cap"``."""
        return self.value.replace("_", " ")

    @property
    def is_articulated(self) -> bool:
        return self is not ManipulationType.FREEDOM_OBJECT

    @property
    def is_angular(self) -> bool:
        """True when the joint state is measured in degrees."""
        return self in (ManipulationType.BOTTLE_CAP, ManipulationType.REVOLUTE_PART)

    @classmethod
    def from_label(cls, text: str) -> "ManipulationType":
        key = "_".join(text.strip().lower().replace("-", " ").split())
        return cls(key)


ARTICULATED_TYPES = tuple(t for t in ManipulationType if t.is_articulated)


def _vec3(values) -> tuple[float, float, float]:
    x, y, z = (float(v) for v in values)
    return (x, y, z)


@dataclass(frozen=True)
class Pose6D:
    """Rigid transform: position (m) plus a 3x3 rotation matrix."""

    position: tuple[float, float, float]
    rotation: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        rot = tuple(_vec3(row) for row in self.rotation)
        if len(rot) != 3:
            raise ValueError("rotation must have three rows")
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def identity(cls) -> "Pose6D":
        return cls((0.0, 0.0, 0.0), np.eye(3))

    @classmethod
    def from_matrix(cls, T) -> "Pose6D":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, 3], T[:3, :3])

    @classmethod
    def from_rows(cls, rows) -> "Pose6D":
        """Build from the 4x3 layout: row 0 position, rows 1-3 rotation."""
        rows = [list(r) for r in rows]
        if len(rows) != 4 or any(len(r) != 3 for r in rows):
            raise ValueError("pose block must be 4x3")
        return cls(rows[0], rows[1:])

    def rows(self) -> list[list[float]]:
        return [list(self.position)] + [list(r) for r in self.rotation]

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.position
        return T

    @property
    def R(self) -> np.ndarray:
        return np.array(self.rotation)

    @property
    def t(self) -> np.ndarray:
        return np.array(self.position)

    def __matmul__(self, other: "Pose6D") -> "Pose6D":
        return Pose6D.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "Pose6D":
        R = self.R
        return Pose6D(-R.T @ self.t, R.T)

    def apply(self, points) -> np.ndarray:
        """Transform an (n, 3) array of points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.R.T + self.t

    def is_rigid(self, tol: float = ROTATION_TOL) -> bool:
        R = self.R
        return bool(
            np.all(np.abs(R.T @ R - np.eye(3)) <= tol)
            and abs(np.linalg.det(R) - 1.0) <= tol
        )


@dataclass(frozen=True)
class JointAxis:
    """A joint axis as two 3D points on the line (m, camera frame)."""

    p0: tuple[float, float, float]
    p1: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "p0", _vec3(self.p0))
        object.__setattr__(self, "p1", _vec3(self.p1))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.p1, self.p0)))

    @property
    def direction(self) -> np.ndarray:
        d = np.subtract(self.p1, self.p0)
        return d / np.linalg.norm(d)

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.p0)


PoseOrAxis = Union[Pose6D, JointAxis]


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    @classmethod
    def default(cls, width: int = DEFAULT_IMAGE_SIZE, height: int = DEFAULT_IMAGE_SIZE) -> "Intrinsics":
        f = 400.0 * width / DEFAULT_IMAGE_SIZE
        return cls(f, f, width / 2.0, height / 2.0)


def _shoelace(pts) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


@dataclass(frozen=True)
class RotatedBox2D:
    """Four image-plane vertices of a (possibly rotated) rectangle.

    Construction does not enforce the rectangle invariants so that malformed
    data can be represented and reported by :func:`validate`; use
    :func:`canonicalize_box` to build checked, canonically ordered boxes.
    """

    vertices: tuple[tuple[float, float], ...]
    degenerate: bool = False

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) != 4:
            raise ValueError(f"a rotated box needs 4 vertices, got {len(verts)}")
        object.__setattr__(self, "vertices", verts)

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    @property
    def signed_area(self) -> float:
        return _shoelace(self.vertices)

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def center(self) -> tuple[float, float]:
        a = self.as_array()
        cx, cy = a.mean(axis=0)
        return (float(cx), float(cy))

    def edge_lengths(self) -> list[float]:
        v = self.vertices
        return [math.dist(v[i], v[(i + 1) % 4]) for i in range(4)]

    def contains(self, point, tol: float = 1e-6) -> bool:
        """Point-in-box test with an outward tolerance in pixels."""
        v = self.as_array()
        if self.signed_area > 0:
            v = v[::-1]
        # canonical order is clockwise in math convention: inside is to the right
        p = np.asarray(point, dtype=float)
        for i in range(4):
            a, b = v[i], v[(i + 1) % 4]
            e = b - a
            n = math.hypot(e[0], e[1])
            if n == 0:
                continue
            cross = (e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])) / n
            if cross > tol:
                return False
        return True


def rectangle_defects(vertices, length_tol: float = RECT_LENGTH_TOL, angle_tol: float = RECT_ANGLE_TOL) -> list[str]:
    """Return human-readable reasons why a 4-cycle is not a rectangle."""
    v = np.asarray(vertices, dtype=float)
    edges = [v[(i + 1) % 4] - v[i] for i in range(4)]
    lengths = [float(np.hypot(*e)) for e in edges]
    problems = []
    if abs(lengths[0] - lengths[2]) > length_tol or abs(lengths[1] - lengths[3]) > length_tol:
        problems.append(
            "opposite edges differ: "
            f"{lengths[0]:.6g} vs {lengths[2]:.6g}, {lengths[1]:.6g} vs {lengths[3]:.6g}"
        )
    for i in range(4):
        a, b = edges[i], edges[(i + 1) % 4]
        if lengths[i] == 0 or lengths[(i + 1) % 4] == 0:
            problems.append(f"edge {i} has zero length")
            break
        angle = math.atan2(abs(a[0] * b[1] - a[1] * b[0]), float(a @ b))
        if abs(angle - math.pi / 2) > angle_tol:
            problems.append(f"corner {(i + 1) % 4} is not square ({math.degrees(angle):.4f} deg)")
            break
    if abs(_shoelace(v)) <= 0:
        problems.append("zero area")
    return problems


def _canonical_cycle(points) -> list[tuple[float, float]]:
    pts = [(float(x), float(y)) for x, y in points]
    cx = sum(p[0] for p in pts) / len(pts)
    cy = sum(p[1] for p in pts) / len(pts)
    # sort by angle around the centroid, then flip to negative shoelace
    cyc = sorted(pts, key=lambda p: math.atan2(p[1] - cy, p[0] - cx))
    if _shoelace(cyc) > 0:
        cyc.reverse()
    start = min(range(len(cyc)), key=lambda i: (cyc[i][1], cyc[i][0]))
    return cyc[start:] + cyc[:start]


def canonicalize_box(
    vertices: Sequence[Sequence[float]],
    length_tol: float = RECT_LENGTH_TOL,
    angle_tol: float = RECT_ANGLE_TOL,
) -> RotatedBox2D:
    """Reorder four rectangle corners into canonical order.

    Raises :class:`NotARectangle` when the points are not a rectangle within
    ``length_tol`` pixels and ``angle_tol`` radians.
    """
    if len(vertices) != 4:
        raise NotARectangle(f"expected 4 vertices, got {len(vertices)}")
    cyc = _canonical_cycle(vertices)
    defects = rectangle_defects(cyc, length_tol, angle_tol)
    if defects:
        raise NotARectangle("; ".join(defects))
    return RotatedBox2D(tuple(cyc))


def is_canonical_order(box: RotatedBox2D) -> bool:
    v = box.vertices
    start = min(range(4), key=lambda i: (v[i][1], v[i][0]))
    return start == 0 and box.signed_area < 0


@dataclass(frozen=True)
class PartAnnotation:
    part_id: str
    pose: PoseOrAxis
    part_box: RotatedBox2D
    grasp_box: RotatedBox2D
    manipulation_type: ManipulationType
    description: str
    functional_box: RotatedBox2D | None = None
    joint_state: float | None = None
    joint_limits: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "manipulation_type", ManipulationType(self.manipulation_type))
        if self.joint_limits is not None:
            lo, hi = self.joint_limits
            object.__setattr__(self, "joint_limits", (float(lo), float(hi)))
        if self.joint_state is not None:
            object.__setattr__(self, "joint_state", float(self.joint_state))

    @property
    def normalized_state(self) -> float | None:
        if self.joint_state is None or self.joint_limits is None:
            return None
        lo, hi = self.joint_limits
        return (self.joint_state - lo) / (hi - lo) if hi > lo else 0.0


@dataclass(frozen=True)
class ObjectRecord:
    object_id: str
    category: str
    parts: tuple[PartAnnotation, ...]
    root_pose: Pose6D | None = None

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))


@dataclass(frozen=True)
class SparseDepth:
    """Depth as a list of ``(u, v, z)`` samples: pixels and meters."""

    points: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(_vec3(p) for p in self.points))

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float).reshape(-1, 3)


@dataclass(frozen=True)
class DenseDepth:
    """Row-major depth map in meters; zero or negative means no reading."""

    width: int
    height: int
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != self.width * self.height:
            raise ValueError("depth map size does not match width*height")
        object.__setattr__(self, "values", vals)

    def as_array(self) -> np.ndarray:
        grid = np.array(self.values, dtype=float).reshape(self.height, self.width)
        vs, us = np.nonzero(grid > 0)
        return np.column_stack([us + 0.5, vs + 0.5, grid[vs, us]])


Depth = Union[SparseDepth, DenseDepth]


@dataclass(frozen=True)
class SceneSample:
    scene_id: str
    intrinsics: Intrinsics
    objects: tuple[ObjectRecord, ...]
    image_width: int = DEFAULT_IMAGE_SIZE
    image_height: int = DEFAULT_IMAGE_SIZE
    depth: Depth | None = None
    split: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def iter_parts(self) -> Iterator[tuple[ObjectRecord, PartAnnotation]]:
        for obj in self.objects:
            for part in obj.parts:
                yield obj, part

    @property
    def part_count(self) -> int:
        return sum(len(o.parts) for o in self.objects)

    def find_part(self, part_id: str) -> tuple[ObjectRecord, PartAnnotation]:
        for obj, part in self.iter_parts():
            if part.part_id == part_id:
                return obj, part
        raise KeyError(part_id)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    path: str
    invariant: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.path}: {self.invariant}" + (f" ({self.detail})" if self.detail else "")


def _box_violations(box: RotatedBox2D, path: str, width: int, height: int) -> list[Violation]:
    out = []
    for d in rectangle_defects(box.vertices):
        out.append(Violation(path, "rectangle", d))
    if not is_canonical_order(box):
        out.append(Violation(path, "canonical_order", repr(box.vertices)))
    if box.degenerate:
        out.append(Violation(path, "area", "degenerate box"))
    xlo, xhi = -VIEWPORT_MARGIN * width, (1 + VIEWPORT_MARGIN) * width
    ylo, yhi = -VIEWPORT_MARGIN * height, (1 + VIEWPORT_MARGIN) * height
    for x, y in box.vertices:
        if not (math.isfinite(x) and math.isfinite(y) and xlo <= x <= xhi and ylo <= y <= yhi):
            out.append(Violation(path, "viewport", f"vertex ({x}, {y}) outside tolerated frame"))
            break
    return out


def validate(sample: SceneSample) -> list[Violation]:
    """Check every type invariant of a sample; an empty list means valid."""
    out: list[Violation] = []
    W, H = sample.image_width, sample.image_height
    if W <= 0 or H <= 0:
        out.append(Violation("image", "size", f"{W}x{H}"))
    K = sample.intrinsics
    if not (K.fx > 0 and K.fy > 0):
        out.append(Violation("intrinsics", "focal_positive", f"fx={K.fx}, fy={K.fy}"))
    if sample.part_count < 1:
        out.append(Violation("objects", "part_count", "no parts"))
    for oi, obj in enumerate(sample.objects):
        for pi, part in enumerate(obj.parts):
            base = f"objects[{oi}].parts[{pi}]"
            mt = part.manipulation_type
            out += _box_violations(part.part_box, f"{base}.part_box", W, H)
            out += _box_violations(part.grasp_box, f"{base}.grasp_box", W, H)
            if part.functional_box is not None:
                out += _box_violations(part.functional_box, f"{base}.functional_box", W, H)
            if (part.functional_box is not None) != (mt is ManipulationType.FREEDOM_OBJECT):
                out.append(Violation(f"{base}.functional_box", "present_iff_freedom_object"))
            if mt is ManipulationType.FREEDOM_OBJECT:
                if not isinstance(part.pose, Pose6D):
                    out.append(Violation(f"{base}.pose", "freedom_object_full_pose"))
                if part.joint_state is not None:
                    out.append(Violation(f"{base}.joint_state", "absent_for_freedom_object"))
            else:
                if not isinstance(part.pose, JointAxis):
                    out.append(Violation(f"{base}.pose", "articulated_axis"))
                if part.joint_state is None:
                    out.append(Violation(f"{base}.joint_state", "present_for_articulated"))
                elif part.joint_limits is not None:
                    lo, hi = part.joint_limits
                    if not lo <= part.joint_state <= hi:
                        out.append(Violation(f"{base}.joint_state", "within_limits",
                                             f"{part.joint_state} not in [{lo}, {hi}]"))
            if isinstance(part.pose, Pose6D) and not part.pose.is_rigid():
                out.append(Violation(f"{base}.pose", "rotation_orthonormal"))
            if isinstance(part.pose, JointAxis) and not part.pose.length >= MIN_AXIS_LENGTH:
                out.append(Violation(f"{base}.pose", "axis_length", f"{part.pose.length}"))
    return out


# --------------------------------------------------------------------------
# serialization


def _box_to_json(box: RotatedBox2D | None):
    if box is None:
        return None
    d = {"vertices": [list(v) for v in box.vertices]}
    if box.degenerate:
        d["degenerate"] = True
    return d


def _box_from_json(d) -> RotatedBox2D | None:
    if d is None:
        return None
    return RotatedBox2D(tuple(tuple(v) for v in d["vertices"]), bool(d.get("degenerate", False)))


def pose_to_json(pose: PoseOrAxis) -> dict:
    if isinstance(pose, Pose6D):
        return {"kind": "full", "matrix": pose.rows()}
    return {"kind": "axis", "p0": list(pose.p0), "p1": list(pose.p1)}


def pose_from_json(d: dict) -> PoseOrAxis:
    if d["kind"] == "full":
        return Pose6D.from_rows(d["matrix"])
    if d["kind"] == "axis":
        return JointAxis(d["p0"], d["p1"])
    raise ValueError(f"unknown pose kind {d['kind']!r}")


def box_to_json(box):
    return _box_to_json(box)


def box_from_json(d):
    return _box_from_json(d)


def part_to_json(p: PartAnnotation) -> dict:
    return {
        "part_id": p.part_id,
        "pose": pose_to_json(p.pose),
        "part_box": _box_to_json(p.part_box),
        "grasp_box": _box_to_json(p.grasp_box),
        "functional_box": _box_to_json(p.functional_box),
        "manipulation_type": p.manipulation_type.value,
        "description": p.description,
        "joint_state": p.joint_state,
        "joint_limits": list(p.joint_limits) if p.joint_limits is not None else None,
    }


def part_from_json(d: dict) -> PartAnnotation:
    return PartAnnotation(
        part_id=d["part_id"],
        pose=pose_from_json(d["pose"]),
        part_box=_box_from_json(d["part_box"]),
        grasp_box=_box_from_json(d["grasp_box"]),
        functional_box=_box_from_json(d.get("functional_box")),
        manipulation_type=ManipulationType(d["manipulation_type"]),
        description=d["description"],
        joint_state=d.get("joint_state"),
        joint_limits=tuple(d["joint_limits"]) if d.get("joint_limits") is not None else None,
    )


def _depth_to_json(depth):
    if depth is None:
        return None
    if isinstance(depth, SparseDepth):
        return {"kind": "points", "points": [list(p) for p in depth.points]}
    return {"kind": "dense", "width": depth.width, "height": depth.height, "values": list(depth.values)}


def _depth_from_json(d):
    if d is None:
        return None
    if d["kind"] == "points":
        return SparseDepth(tuple(tuple(p) for p in d["points"]))
    return DenseDepth(d["width"], d["height"], tuple(d["values"]))


def sample_to_dict(s: SceneSample) -> dict:
    K = s.intrinsics
    return {
        "scene_id": s.scene_id,
        "split": s.split,
        "image_width": s.image_width,
        "image_height": s.image_height,
        "intrinsics": {"fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy},
        "objects": [
            {
                "object_id": o.object_id,
                "category": o.category,
                "root_pose": pose_to_json(o.root_pose) if o.root_pose is not None else None,
                "parts": [part_to_json(p) for p in o.parts],
            }
            for o in s.objects
        ],
        "depth": _depth_to_json(s.depth),
    }


def sample_from_dict(d: dict) -> SceneSample:
    objects = tuple(
        ObjectRecord(
            object_id=o["object_id"],
            category=o["category"],
            parts=tuple(part_from_json(p) for p in o["parts"]),
            root_pose=pose_from_json(o["root_pose"]) if o.get("root_pose") else None,
        )
        for o in d["objects"]
    )
    return SceneSample(
        scene_id=d["scene_id"],
        intrinsics=Intrinsics(**d["intrinsics"]),
        objects=objects,
        image_width=int(d["image_width"]),
        image_height=int(d["image_height"]),
        depth=_depth_from_json(d.get("depth")),
        split=d.get("split"),
    )


def dumps(obj) -> str:
    """Compact, key-order-stable JSON; floats use shortest round-trip repr."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def sample_to_json(s: SceneSample) -> str:
    return dumps(sample_to_dict(s))


def sample_from_json(line: str) -> SceneSample:
    return sample_from_dict(json.loads(line))


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_jsonl(path, rows: Iterable[str]) -> int:
    lines = list(rows)
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    return len(lines)


def iter_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_samples(path, samples: Iterable[SceneSample]) -> int:
    return write_jsonl(path, (sample_to_json(s) for s in samples))


def read_samples(path) -> list[SceneSample]:
    return [sample_from_dict(d) for d in iter_jsonl(path)]


def build_manifest(samples: Sequence[SceneSample]) -> dict:
    """Per-split and per-category counts of samples, objects and parts."""
    splits: dict[str, dict] = {}
    for s in samples:
        split = s.split or "unassigned"
        entry = splits.setdefault(split, {"samples": 0, "categories": Counter(), "objects": set(), "parts": 0})
        entry["samples"] += 1
        entry["parts"] += s.part_count
        for o in s.objects:
            entry["categories"][o.category] += 1
            entry["objects"].add(o.object_id)
    out = {}
    for split in sorted(splits):
        e = splits[split]
        out[split] = {
            "samples": e["samples"],
            "parts": e["parts"],
            "objects": len(e["objects"]),
            "object_renders_per_category": dict(sorted(e["categories"].items())),
        }
    return {"total_samples": len(samples), "splits": out}
