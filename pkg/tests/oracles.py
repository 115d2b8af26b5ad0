"""Brute-force reference implementations, independent of the library kernels."""

from __future__ import annotations

import math

import numpy as np


def box_mask(vertices, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Boolean raster of a convex quadrilateral sampled at grid points."""
    v = np.asarray(vertices, dtype=float)
    area = 0.5 * sum(v[i, 0] * v[(i + 1) % 4, 1] - v[(i + 1) % 4, 0] * v[i, 1] for i in range(4))
    sign = 1.0 if area >= 0 else -1.0
    mask = np.ones(xs.shape, dtype=bool)
    for i in range(4):
        a, b = v[i], v[(i + 1) % 4]
        mask &= sign * ((b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0])) >= 0
    return mask


def raster_iou(a, b, extent: float = 448.0, cells: int = 1000) -> float:
    """IoU of two boxes on a ``cells`` x ``cells`` grid of pixel centers.

    Only the grid rows and columns inside the union's bounding box are
    sampled; cells outside it cannot be covered by either box.
    """
    step = extent / cells
    v = np.vstack([a.vertices, b.vertices])
    lo = np.clip(np.floor(v.min(0) / step).astype(int), 0, cells)
    hi = np.clip(np.ceil(v.max(0) / step).astype(int) + 1, 0, cells)
    cx = (np.arange(lo[0], hi[0]) + 0.5) * step
    cy = (np.arange(lo[1], hi[1]) + 0.5) * step
    xs, ys = np.meshgrid(cx, cy)
    ma, mb = box_mask(a.vertices, xs, ys), box_mask(b.vertices, xs, ys)
    union = np.count_nonzero(ma | mb)
    return np.count_nonzero(ma & mb) / union if union else 0.0


def sweep_min_rect_area(points, step_deg: float = 0.01) -> float:
    """Smallest enclosing-rectangle area over rotations in ``step_deg`` steps."""
    p = np.asarray(points, dtype=float)
    t = np.radians(np.arange(0.0, 90.0, step_deg))
    c, s = np.cos(t), np.sin(t)
    best = math.inf
    for lo in range(0, len(t), 1000):
        cc, ss = c[lo:lo + 1000, None], s[lo:lo + 1000, None]
        u = cc * p[:, 0] + ss * p[:, 1]
        w = -ss * p[:, 0] + cc * p[:, 1]
        area = (u.max(1) - u.min(1)) * (w.max(1) - w.min(1))
        best = min(best, float(area.min()))
    return best


def rot_z(deg: float) -> np.ndarray:
    t = math.radians(deg)
    return np.array([[math.cos(t), -math.sin(t), 0.0], [math.sin(t), math.cos(t), 0.0], [0.0, 0.0, 1.0]])


def rodrigues(axis, deg: float) -> np.ndarray:
    """Rotation about a unit axis by ``deg`` degrees, written out term by term."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    t = math.radians(deg)
    return np.eye(3) + math.sin(t) * K + (1.0 - math.cos(t)) * (K @ K)


def random_rotation(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
