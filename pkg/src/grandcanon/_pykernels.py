"""Fallback kernels built on numpy and scipy; same contracts as ``_ckernels``."""

import numpy as np
from scipy.spatial import cKDTree


def _close_pairs(tree_a, tree_b, delta):
    # cKDTree uses a closed ball; the cutoff here is strict.
    dist = tree_a.sparse_distance_matrix(tree_b, delta, output_type="ndarray")
    return dist[dist["v"] < delta]


def cross_pairs(points_s, points_r, delta):
    points_s = np.asarray(points_s, dtype=np.float64)
    points_r = np.asarray(points_r, dtype=np.float64)
    flags_s = np.zeros(len(points_s), dtype=bool)
    flags_r = np.zeros(len(points_r), dtype=bool)
    if len(points_s) == 0 or len(points_r) == 0 or delta <= 0.0:
        return 0, flags_s, flags_r
    pairs = _close_pairs(cKDTree(points_s), cKDTree(points_r), delta)
    flags_s[pairs["i"]] = True
    flags_r[pairs["j"]] = True
    return int(len(pairs)), flags_s, flags_r


def internal_pairs(points, delta):
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2 or delta <= 0.0:
        return 0
    tree = cKDTree(points)
    pairs = _close_pairs(tree, tree, delta)
    return int(np.count_nonzero(pairs["i"] < pairs["j"]))


def project_polytope(points, normals, offsets, tol, max_iter):
    """Dykstra's alternating projections, vectorized over points."""
    x = np.array(points, dtype=np.float64, copy=True)
    a = np.asarray(normals, dtype=np.float64)
    b = np.asarray(offsets, dtype=np.float64)
    n, d = x.shape
    incr = np.zeros((a.shape[0], n, d))
    sweeps = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xa = x[idx]
        xprev = xa.copy()
        # x can stall for a sweep while the corrections still move,
        # so both enter the stopping test.
        change = np.zeros(len(idx))
        for i in range(a.shape[0]):
            y = xa + incr[i, idx]
            viol = y @ a[i] - b[i]
            xa = y - np.maximum(viol, 0.0)[:, None] * a[i]
            new_incr = y - xa
            change += np.sum((new_incr - incr[i, idx]) ** 2, axis=1)
            incr[i, idx] = new_incr
        x[idx] = xa
        sweeps[idx] += 1
        change += np.sum((xa - xprev) ** 2, axis=1)
        done = np.sqrt(change) < tol
        active[idx[done]] = False
    return x, sweeps
