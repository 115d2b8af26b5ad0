"""Surface point samplers for procedural parts (all in meters, link frame)."""

import numpy as np


def box_surface(rng, lo, hi, n):
    """Uniform samples on the surface of the axis-aligned box [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    size = hi - lo
    areas = np.array([size[1] * size[2], size[1] * size[2],
                      size[0] * size[2], size[0] * size[2],
                      size[0] * size[1], size[0] * size[1]])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    pts = lo + rng.random((n, 3)) * size
    axis = face // 2
    side = face % 2
    pts[np.arange(n), axis] = np.where(side == 0, lo[axis], hi[axis])
    return pts


def cylinder_surface(rng, center, axis, radius, length, n, caps=True):
    """Samples on a cylinder aligned with ``axis`` ("x", "y" or "z")."""
    a = "xyz".index(axis)
    others = [i for i in range(3) if i != a]
    side_area = 2 * np.pi * radius * length
    cap_area = 2 * np.pi * radius ** 2 if caps else 0.0
    on_cap = rng.random(n) < cap_area / (side_area + cap_area)
    phi = rng.random(n) * 2 * np.pi
    r = np.where(on_cap, radius * np.sqrt(rng.random(n)), radius)
    h = np.where(on_cap, np.where(rng.random(n) < 0.5, -0.5, 0.5) * length, (rng.random(n) - 0.5) * length)
    pts = np.zeros((n, 3))
    pts[:, a] = h
    pts[:, others[0]] = r * np.cos(phi)
    pts[:, others[1]] = r * np.sin(phi)
    return pts + np.asarray(center, dtype=float)


def disk(rng, center, radius, thickness, n):
    """A flat lid: a short z-aligned cylinder."""
    return cylinder_surface(rng, center, "z", radius, thickness, n, caps=True)


def arc_tube(rng, radius, phi_lo, phi_hi, tube_radius, n):
    """Tube around the arc (0, r cos phi, r sin phi), phi in radians."""
    phi = phi_lo + rng.random(n) * (phi_hi - phi_lo)
    theta = rng.random(n) * 2 * np.pi
    center = np.column_stack([np.zeros(n), radius * np.cos(phi), radius * np.sin(phi)])
    radial = np.column_stack([np.zeros(n), np.cos(phi), np.sin(phi)])
    normal_x = np.array([1.0, 0.0, 0.0])
    offset = tube_radius * (np.cos(theta)[:, None] * normal_x + np.sin(theta)[:, None] * radial)
    return center + offset


def hemisphere(rng, center, radius, n):
    """Lower hemisphere shell (a ladle bowl)."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v[:, 2] = -np.abs(v[:, 2])
    return v * radius + np.asarray(center, dtype=float)


def random_rotation(rng) -> np.ndarray:
    """Uniformly distributed rotation matrix from a normalized Gaussian quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
