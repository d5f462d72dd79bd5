"""Pure-python (numpy/scipy) implementations of the hot kernels.

Same contracts as ``kernels._native``; selected at import time when the
compiled extension is unavailable or ``GARMENTFLOW_PURE_PYTHON`` is set.
"""

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree


def pairwise_sqdist(a, b):
    """Squared euclidean distances, shape (len(a), len(b))."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def solve_assignment(cost):
    """Exact min-cost bijection on a square cost matrix.

    Returns col[i]: the column assigned to row i.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(cost.shape[0], dtype=np.int64)
    out[rows] = cols
    return out


def nn_sqdist(ref, query):
    """For each query point, index and squared distance of its nearest ref point."""
    ref = np.asarray(ref, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if len(ref) == 0:
        raise ValueError("empty reference set")
    dist, idx = cKDTree(ref).query(query, k=1)
    return idx.astype(np.int64), dist.astype(np.float64) ** 2


def farthest_points(points, count, start):
    """Greedy farthest-point subset of ``count`` indices, seeded at ``start``."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}]")
    if not 0 <= start < n:
        raise ValueError("start index out of range")
    chosen = np.empty(count, dtype=np.int64)
    mind = np.full(n, np.inf)
    cur = int(start)
    for i in range(count):
        chosen[i] = cur
        d = ((points - points[cur]) ** 2).sum(axis=1)
        np.minimum(mind, d, out=mind)
        cur = int(np.argmax(mind))
    return chosen
