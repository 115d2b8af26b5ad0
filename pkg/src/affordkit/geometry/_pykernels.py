"""Reference kernels in plain Python and numpy.

Same call signatures as the compiled ``_ckernels`` module. All polygons are
``(n, 2)`` float64 arrays in math-positive (counter-clockwise, y up) order.
"""

import math

import numpy as np

AREA_TIE_RTOL = 1e-9


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Andrew's monotone chain; collinear points are dropped.

    Returns fewer than three rows when the input is degenerate.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return pts.copy()
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    srt = [tuple(p) for p in pts[order]]
    uniq = [srt[0]]
    for p in srt[1:]:
        if p != uniq[-1]:
            uniq.append(p)
    if len(uniq) < 3:
        return np.array(uniq, dtype=np.float64)
    lower = []
    for p in uniq:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(uniq):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=np.float64)


def polygon_area(poly):
    """Signed shoelace area; positive for counter-clockwise input."""
    p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def clip_convex(subject, clip):
    """Sutherland-Hodgman clipping of ``subject`` by the convex ``clip``."""
    out = [tuple(p) for p in np.asarray(subject, dtype=np.float64).reshape(-1, 2)]
    cl = np.asarray(clip, dtype=np.float64).reshape(-1, 2)
    m = len(cl)
    for i in range(m):
        if not out:
            break
        a = cl[i]
        b = cl[(i + 1) % m]
        ex, ey = b[0] - a[0], b[1] - a[1]
        inp = out
        out = []
        n = len(inp)
        for j in range(n):
            p = inp[j]
            q = inp[(j + 1) % n]
            sp = ex * (p[1] - a[1]) - ey * (p[0] - a[0])
            sq = ex * (q[1] - a[1]) - ey * (q[0] - a[0])
            if sp >= 0:
                out.append(p)
                if sq < 0:
                    t = sp / (sp - sq)
                    out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
            elif sq >= 0:
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    cleaned = []
    for p in out:
        if not cleaned or p != cleaned[-1]:
            cleaned.append(p)
    if len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
        cleaned.pop()
    return np.array(cleaned, dtype=np.float64).reshape(-1, 2)


def _edge_angle_mod90(ux, uy):
    a = math.degrees(math.atan2(uy, ux)) % 90.0
    if 90.0 - a < 1e-9:
        a = 0.0
    return a


def min_area_rect(hull):
    """Minimum-area rectangle over candidate directions given by hull edges.

    ``hull`` must be counter-clockwise with at least three vertices. Returns
    ``(corners, area)`` where corners is a ``(4, 2)`` array.
    """
    h = np.asarray(hull, dtype=np.float64).reshape(-1, 2)
    edges = np.roll(h, -1, axis=0) - h
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    keep = lengths > 0
    u = edges[keep] / lengths[keep, None]
    v = np.column_stack([-u[:, 1], u[:, 0]])
    pu = h @ u.T
    pv = h @ v.T
    umin, umax = pu.min(axis=0), pu.max(axis=0)
    vmin, vmax = pv.min(axis=0), pv.max(axis=0)
    areas = (umax - umin) * (vmax - vmin)
    best = None
    amin = float(areas.min())
    thresh = amin * (1.0 + AREA_TIE_RTOL)
    for k in range(len(areas)):
        if areas[k] <= thresh:
            ang = _edge_angle_mod90(u[k, 0], u[k, 1])
            if best is None or ang < best[0]:
                best = (ang, k)
    k = best[1]
    uk, vk = u[k], v[k]
    corners = np.array([
        uk * umin[k] + vk * vmin[k],
        uk * umax[k] + vk * vmin[k],
        uk * umax[k] + vk * vmax[k],
        uk * umin[k] + vk * vmax[k],
    ])
    return corners, float(areas[k])
