# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled planar kernels; drop-in replacements for ``_pykernels``."""

import numpy as np
from libc.math cimport sqrt, atan2, fmod, M_PI

cdef double AREA_TIE_RTOL = 1e-9


cdef inline double _cross(double ox, double oy, double ax, double ay,
                          double bx, double by) nogil:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def convex_hull(points):
    cdef double[:, ::1] pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t n = pts.shape[0]
    if n == 0:
        return np.empty((0, 2))
    order = np.lexsort((np.asarray(pts[:, 1]), np.asarray(pts[:, 0])))
    srt_arr = np.ascontiguousarray(np.asarray(pts)[order])
    cdef double[:, ::1] s = srt_arr
    uniq_arr = np.empty((n, 2))
    cdef double[:, ::1] u = uniq_arr
    cdef Py_ssize_t m = 0, i, k, t
    for i in range(n):
        if m == 0 or s[i, 0] != u[m - 1, 0] or s[i, 1] != u[m - 1, 1]:
            u[m, 0] = s[i, 0]
            u[m, 1] = s[i, 1]
            m += 1
    if m < 3:
        return uniq_arr[:m].copy()
    out_arr = np.empty((2 * m, 2))
    cdef double[:, ::1] o = out_arr
    k = 0
    for i in range(m):
        while k >= 2 and _cross(o[k - 2, 0], o[k - 2, 1], o[k - 1, 0], o[k - 1, 1], u[i, 0], u[i, 1]) <= 0:
            k -= 1
        o[k, 0] = u[i, 0]
        o[k, 1] = u[i, 1]
        k += 1
    t = k + 1
    for i in range(m - 2, -1, -1):
        while k >= t and _cross(o[k - 2, 0], o[k - 2, 1], o[k - 1, 0], o[k - 1, 1], u[i, 0], u[i, 1]) <= 0:
            k -= 1
        o[k, 0] = u[i, 0]
        o[k, 1] = u[i, 1]
        k += 1
    return out_arr[:k - 1].copy()


def polygon_area(poly):
    cdef double[:, ::1] p = np.ascontiguousarray(np.asarray(poly, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t n = p.shape[0], i, j
    cdef double s = 0.0
    if n < 3:
        return 0.0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        s += p[i, 0] * p[j, 1] - p[j, 0] * p[i, 1]
    return 0.5 * s


def clip_convex(subject, clip):
    cdef double[:, ::1] sub = np.ascontiguousarray(np.asarray(subject, dtype=np.float64).reshape(-1, 2))
    cdef double[:, ::1] cl = np.ascontiguousarray(np.asarray(clip, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t n = sub.shape[0], m = cl.shape[0]
    cdef Py_ssize_t cap = n + m + 4
    buf_a = np.empty((cap, 2))
    buf_b = np.empty((cap, 2))
    cdef double[:, ::1] inp = buf_a
    cdef double[:, ::1] out = buf_b
    cdef double[:, ::1] tmp
    cdef Py_ssize_t i, j, jn, nin, nout
    cdef double ax, ay, ex, ey, sp, sq, tt, px, py, qx, qy
    for i in range(n):
        inp[i, 0] = sub[i, 0]
        inp[i, 1] = sub[i, 1]
    nin = n
    for i in range(m):
        if nin == 0:
            break
        ax = cl[i, 0]
        ay = cl[i, 1]
        jn = i + 1
        if jn == m:
            jn = 0
        ex = cl[jn, 0] - ax
        ey = cl[jn, 1] - ay
        nout = 0
        for j in range(nin):
            px = inp[j, 0]
            py = inp[j, 1]
            jn = j + 1
            if jn == nin:
                jn = 0
            qx = inp[jn, 0]
            qy = inp[jn, 1]
            sp = ex * (py - ay) - ey * (px - ax)
            sq = ex * (qy - ay) - ey * (qx - ax)
            if sp >= 0:
                out[nout, 0] = px
                out[nout, 1] = py
                nout += 1
                if sq < 0:
                    tt = sp / (sp - sq)
                    out[nout, 0] = px + tt * (qx - px)
                    out[nout, 1] = py + tt * (qy - py)
                    nout += 1
            elif sq >= 0:
                tt = sp / (sp - sq)
                out[nout, 0] = px + tt * (qx - px)
                out[nout, 1] = py + tt * (qy - py)
                nout += 1
        tmp = inp
        inp = out
        out = tmp
        nin = nout
    res = np.empty((nin, 2))
    cdef double[:, ::1] r = res
    cdef Py_ssize_t k = 0
    for j in range(nin):
        if k == 0 or inp[j, 0] != r[k - 1, 0] or inp[j, 1] != r[k - 1, 1]:
            r[k, 0] = inp[j, 0]
            r[k, 1] = inp[j, 1]
            k += 1
    if k > 1 and r[0, 0] == r[k - 1, 0] and r[0, 1] == r[k - 1, 1]:
        k -= 1
    return res[:k].copy()


cdef inline double _angle_mod90(double ux, double uy) nogil:
    cdef double a = atan2(uy, ux) * 180.0 / M_PI
    a = fmod(a, 90.0)
    if a < 0:
        a += 90.0
    if 90.0 - a < 1e-9:
        a = 0.0
    return a


def min_area_rect(hull):
    """Rotating calipers: O(h) sweep over hull edge directions."""
    cdef double[:, ::1] h = np.ascontiguousarray(np.asarray(hull, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t i, i1, j, k, l, steps, nxt
    cdef double ux, uy, vx, vy, ln, umin, umax, vmin, vmax, area, ang
    cdef double best_area = -1.0, best_ang = 0.0
    cdef double bux = 1.0, buy = 0.0, bumin = 0.0, bumax = 0.0, bvmin = 0.0, bvmax = 0.0
    areas = np.empty(n)
    cdef double[::1] ar = areas
    angs = np.empty(n)
    cdef double[::1] ag = angs
    ext = np.empty((n, 6))
    cdef double[:, ::1] ex = ext

    j = 0
    k = 0
    l = 0
    for i in range(n):
        i1 = i + 1
        if i1 == n:
            i1 = 0
        ux = h[i1, 0] - h[i, 0]
        uy = h[i1, 1] - h[i, 1]
        ln = sqrt(ux * ux + uy * uy)
        ux /= ln
        uy /= ln
        vx = -uy
        vy = ux
        if i == 0:
            for steps in range(n):
                if h[steps, 0] * ux + h[steps, 1] * uy > h[j, 0] * ux + h[j, 1] * uy:
                    j = steps
                if h[steps, 0] * vx + h[steps, 1] * vy > h[k, 0] * vx + h[k, 1] * vy:
                    k = steps
                if h[steps, 0] * ux + h[steps, 1] * uy < h[l, 0] * ux + h[l, 1] * uy:
                    l = steps
        else:
            for steps in range(n):
                nxt = j + 1
                if nxt == n:
                    nxt = 0
                if h[nxt, 0] * ux + h[nxt, 1] * uy > h[j, 0] * ux + h[j, 1] * uy:
                    j = nxt
                else:
                    break
            for steps in range(n):
                nxt = k + 1
                if nxt == n:
                    nxt = 0
                if h[nxt, 0] * vx + h[nxt, 1] * vy > h[k, 0] * vx + h[k, 1] * vy:
                    k = nxt
                else:
                    break
            for steps in range(n):
                nxt = l + 1
                if nxt == n:
                    nxt = 0
                if h[nxt, 0] * ux + h[nxt, 1] * uy < h[l, 0] * ux + h[l, 1] * uy:
                    l = nxt
                else:
                    break
        umax = h[j, 0] * ux + h[j, 1] * uy
        umin = h[l, 0] * ux + h[l, 1] * uy
        vmax = h[k, 0] * vx + h[k, 1] * vy
        vmin = h[i, 0] * vx + h[i, 1] * vy
        ar[i] = (umax - umin) * (vmax - vmin)
        ag[i] = _angle_mod90(ux, uy)
        ex[i, 0] = ux
        ex[i, 1] = uy
        ex[i, 2] = umin
        ex[i, 3] = umax
        ex[i, 4] = vmin
        ex[i, 5] = vmax

    best_area = ar[0]
    for i in range(n):
        if ar[i] < best_area:
            best_area = ar[i]
    cdef double thresh = best_area * (1.0 + AREA_TIE_RTOL)
    cdef Py_ssize_t bi = -1
    for i in range(n):
        if ar[i] <= thresh and (bi < 0 or ag[i] < best_ang):
            bi = i
            best_ang = ag[i]
    bux = ex[bi, 0]
    buy = ex[bi, 1]
    bumin = ex[bi, 2]
    bumax = ex[bi, 3]
    bvmin = ex[bi, 4]
    bvmax = ex[bi, 5]
    vx = -buy
    vy = bux
    corners = np.array([
        [bux * bumin + vx * bvmin, buy * bumin + vy * bvmin],
        [bux * bumax + vx * bvmin, buy * bumax + vy * bvmin],
        [bux * bumax + vx * bvmax, buy * bumax + vy * bvmax],
        [bux * bumin + vx * bvmax, buy * bumin + vy * bvmax],
    ])
    return corners, float(ar[bi])
