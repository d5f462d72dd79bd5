# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: pairwise costs, exact assignment, nearest neighbors, FPS.

These dominate runtime in guided sampling (assignment / nearest-neighbor
objectives are evaluated every guidance step) and in set-level evaluation.
Contracts mirror ``kernels.fallback``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double INF = float("inf")


def pairwise_sqdist(a, b):
    """Squared euclidean distances, shape (len(a), len(b))."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], d = av.shape[1]
    if bv.shape[1] != d:
        raise ValueError("dimension mismatch")
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = av[i, k] - bv[j, k]
                acc += diff * diff
            ov[i, j] = acc
    return out


def solve_assignment(cost):
    """Exact min-cost bijection on a square cost matrix.

    Shortest-augmenting-path Hungarian method with row/column potentials,
    O(n^3). Returns col[i]: the column assigned to row i.
    """
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    if c.shape[1] != n:
        raise ValueError("cost matrix must be square")

    # 1-based working arrays; p[j] = row matched to column j, p[0] = current row.
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u_arr = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_arr = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] minv_arr = np.empty(n + 1)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] p_arr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] way_arr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] used_arr = np.zeros(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, minv = minv_arr
    cdef cnp.int64_t[::1] p = p_arr, way = way_arr
    cdef cnp.uint8_t[::1] used = used_arr

    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INF
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break

    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    for j in range(1, n + 1):
        ov[p[j] - 1] = j - 1
    return out


def nn_sqdist(ref, query):
    """For each query point, index and squared distance of its nearest ref point."""
    cdef double[:, ::1] rv = np.ascontiguousarray(ref, dtype=np.float64)
    cdef double[:, ::1] qv = np.ascontiguousarray(query, dtype=np.float64)
    cdef Py_ssize_t n = rv.shape[0], m = qv.shape[0], d = rv.shape[1]
    if n == 0:
        raise ValueError("empty reference set")
    if qv.shape[1] != d:
        raise ValueError("dimension mismatch")
    idx = np.empty(m, dtype=np.int64)
    sqd = np.empty(m, dtype=np.float64)
    cdef cnp.int64_t[::1] iv = idx
    cdef double[::1] sv = sqd
    cdef Py_ssize_t i, j, k, best_j
    cdef double best, acc, diff
    for i in range(m):
        best = INF
        best_j = 0
        for j in range(n):
            acc = 0.0
            for k in range(d):
                diff = qv[i, k] - rv[j, k]
                acc += diff * diff
            if acc < best:
                best = acc
                best_j = j
        iv[i] = best_j
        sv[i] = best
    return idx, sqd


def farthest_points(points, count, start):
    """Greedy farthest-point subset of ``count`` indices, seeded at ``start``."""
    cdef double[:, ::1] pv = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0], d = pv.shape[1]
    cdef Py_ssize_t k = count, s = start
    if not 1 <= k <= n:
        raise ValueError(f"count must be in [1, {n}]")
    if not 0 <= s < n:
        raise ValueError("start index out of range")
    chosen = np.empty(k, dtype=np.int64)
    cdef cnp.int64_t[::1] cv = chosen
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mind_arr = np.full(n, INF)
    cdef double[::1] mind = mind_arr
    cdef Py_ssize_t i, j, c, cur = s, nxt
    cdef double acc, diff, best
    for i in range(k):
        cv[i] = cur
        best = -1.0
        nxt = 0
        for j in range(n):
            acc = 0.0
            for c in range(d):
                diff = pv[j, c] - pv[cur, c]
                acc += diff * diff
            if acc < mind[j]:
                mind[j] = acc
            if mind[j] > best:
                best = mind[j]
                nxt = j
        cur = nxt
    return chosen
