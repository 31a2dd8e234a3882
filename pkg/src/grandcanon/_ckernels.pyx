"""Compiled hot loops: pair counting under a hard cutoff and Dykstra projection."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef Py_ssize_t _lower_bound(const double[::1] xs, double value) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = xs.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if xs[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo


def cross_pairs(points_s, points_r, double delta):
    """Count pairs (i in S, j in R) with |x_i - x_j| < delta.

    Returns ``(count, flags_s, flags_r)`` where the flags mark particles that
    take part in at least one such pair.
    """
    points_s = np.ascontiguousarray(points_s, dtype=np.float64)
    points_r = np.ascontiguousarray(points_r, dtype=np.float64)
    cdef double[:, ::1] ps = points_s
    cdef Py_ssize_t ns = points_s.shape[0], nr = points_r.shape[0], d = points_s.shape[1]
    flags_s_arr = np.zeros(ns, dtype=np.uint8)
    flags_r_arr = np.zeros(nr, dtype=np.uint8)
    if ns == 0 or nr == 0 or delta <= 0.0:
        return 0, flags_s_arr.astype(bool), flags_r_arr.astype(bool)

    order_arr = np.argsort(points_r[:, 0], kind="stable").astype(np.intp)
    cdef Py_ssize_t[::1] order = order_arr
    cdef double[:, ::1] pr = np.ascontiguousarray(points_r[order_arr])
    cdef double[::1] xr = np.ascontiguousarray(pr[:, 0])
    cdef cnp.uint8_t[::1] fs = flags_s_arr
    cdef cnp.uint8_t[::1] fr = flags_r_arr
    cdef double d2max = delta * delta, acc, diff
    cdef Py_ssize_t i, j, k, start
    cdef long long count = 0

    with nogil:
        for i in range(ns):
            start = _lower_bound(xr, ps[i, 0] - delta)
            j = start
            while j < nr and xr[j] < ps[i, 0] + delta:
                acc = 0.0
                for k in range(d):
                    diff = ps[i, k] - pr[j, k]
                    acc = acc + diff * diff
                if acc < d2max:
                    count += 1
                    fs[i] = 1
                    fr[order[j]] = 1
                j += 1
    return int(count), flags_s_arr.astype(bool), flags_r_arr.astype(bool)


def internal_pairs(points, double delta):
    """Count unordered pairs i < j inside one point set with |x_i - x_j| < delta."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = points.shape[0]
    if n < 2 or delta <= 0.0:
        return 0
    order_arr = np.argsort(points[:, 0], kind="stable")
    cdef double[:, ::1] p = np.ascontiguousarray(points[order_arr])
    cdef Py_ssize_t d = p.shape[1], i, j, k
    cdef double d2max = delta * delta, acc, diff
    cdef long long count = 0

    with nogil:
        for i in range(n):
            j = i + 1
            while j < n and p[j, 0] - p[i, 0] < delta:
                acc = 0.0
                for k in range(d):
                    diff = p[i, k] - p[j, k]
                    acc = acc + diff * diff
                if acc < d2max:
                    count += 1
                j += 1
    return int(count)


def project_polytope(points, normals, offsets, double tol, int max_iter):
    """Euclidean projection onto {x : a_i . x <= b_i} by Dykstra's algorithm.

    ``normals`` must have unit rows. Returns ``(projections, sweeps)``.
    """
    cdef double[:, ::1] x0 = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] a = np.ascontiguousarray(normals, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef Py_ssize_t n = x0.shape[0], d = x0.shape[1], m = a.shape[0]
    out_arr = np.array(x0, dtype=np.float64, copy=True)
    sweeps_arr = np.zeros(n, dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef long long[::1] sweeps = sweeps_arr
    cdef double[:, ::1] incr = np.zeros((m, d), dtype=np.float64)
    cdef double[::1] x = np.zeros(d, dtype=np.float64)
    cdef double[::1] xprev = np.zeros(d, dtype=np.float64)
    cdef double[::1] y = np.zeros(d, dtype=np.float64)
    cdef Py_ssize_t p, it, i, k
    cdef double viol, change, diff

    with nogil:
        for p in range(n):
            for k in range(d):
                x[k] = x0[p, k]
            for i in range(m):
                for k in range(d):
                    incr[i, k] = 0.0
            it = 0
            while it < max_iter:
                it += 1
                for k in range(d):
                    xprev[k] = x[k]
                # x can stall for a sweep while the corrections still move,
                # so both enter the stopping test.
                change = 0.0
                for i in range(m):
                    viol = -b[i]
                    for k in range(d):
                        y[k] = x[k] + incr[i, k]
                        viol = viol + a[i, k] * y[k]
                    if viol > 0.0:
                        for k in range(d):
                            x[k] = y[k] - viol * a[i, k]
                    else:
                        for k in range(d):
                            x[k] = y[k]
                    for k in range(d):
                        diff = y[k] - x[k] - incr[i, k]
                        change = change + diff * diff
                        incr[i, k] = y[k] - x[k]
                for k in range(d):
                    diff = x[k] - xprev[k]
                    change = change + diff * diff
                if sqrt(change) < tol:
                    break
            for k in range(d):
                out[p, k] = x[k]
            sweeps[p] = it
    return out_arr, sweeps_arr
