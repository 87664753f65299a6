# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the hot sampling loops.

Mirrors _pykernels exactly: same uniform-consumption order, same ascending
accumulation order, so both backends draw the same indices for a seed.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


cdef Py_ssize_t _pick(double[::1] cum, double[::1] weights, double target) except -1:
    cdef Py_ssize_t n = cum.shape[0]
    cdef Py_ssize_t lo = 0, hi = n, mid
    # first index with cum > target (matches np.searchsorted side="right")
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] <= target:
            lo = mid + 1
        else:
            hi = mid
    if lo >= n:
        lo = n - 1
        while lo >= 0 and weights[lo] <= 0.0:
            lo -= 1
        if lo < 0:
            raise RuntimeError("no positive weights left to draw from")
    return lo


def weighted_wor(double[::1] weights, Py_ssize_t size, double[::1] uniforms):
    """Sequential weighted draws without replacement on renormalized residuals."""
    cdef Py_ssize_t n = weights.shape[0]
    cdef cnp.ndarray[double, ndim=1] w = np.array(weights, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cum = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(size, dtype=np.int64)
    cdef double[::1] wv = w
    cdef double[::1] cv = cum
    cdef double acc, total
    cdef Py_ssize_t s, i, j

    for s in range(size):
        acc = 0.0
        for j in range(n):
            acc += wv[j]
            cv[j] = acc
        total = cv[n - 1]
        if total <= 0.0:
            raise RuntimeError("total weight exhausted before reaching the requested size")
        i = _pick(cv, wv, uniforms[s] * total)
        out[s] = i
        wv[i] = 0.0
    return out


def kdpp_items(double[:, ::1] M, double[::1] uniforms):
    """Sequential item selection for a dual-representation k-DPP draw.

    Consumes M in place; draws exactly M.shape[0] items.
    """
    cdef Py_ssize_t m = M.shape[0]
    cdef Py_ssize_t n = M.shape[1]
    cdef cnp.ndarray[double, ndim=1] probs = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cum = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(m, dtype=np.int64)
    cdef double[::1] pv = probs
    cdef double[::1] cv = cum
    cdef double acc, total, pivot, c, proj, norm, best
    cdef Py_ssize_t step, active, i, j, t, s, t0

    for step in range(m):
        active = m - step
        for j in range(n):
            pv[j] = 0.0
        for t in range(active):
            for j in range(n):
                pv[j] += M[t, j] * M[t, j]
        acc = 0.0
        for j in range(n):
            acc += pv[j]
            cv[j] = acc
        total = cv[n - 1]
        if total <= 0.0:
            raise RuntimeError("degenerate k-DPP state: zero selection mass")
        i = _pick(cv, pv, uniforms[step] * total)
        out[step] = i

        t0 = 0
        best = fabs(M[0, i])
        for t in range(1, active):
            if fabs(M[t, i]) > best:
                best = fabs(M[t, i])
                t0 = t
        pivot = M[t0, i]
        for t in range(active):
            if t != t0 and M[t, i] != 0.0:
                c = M[t, i] / pivot
                for j in range(n):
                    M[t, j] -= c * M[t0, j]
        for j in range(n):
            M[t0, j] = M[active - 1, j]
        active -= 1

        for s in range(active):
            for t in range(s):
                proj = 0.0
                for j in range(n):
                    proj += M[s, j] * M[t, j]
                for j in range(n):
                    M[s, j] -= proj * M[t, j]
            norm = 0.0
            for j in range(n):
                norm += M[s, j] * M[s, j]
            norm = sqrt(norm)
            if norm > 1e-12:
                for j in range(n):
                    M[s, j] /= norm
            else:
                for j in range(n):
                    M[s, j] = 0.0
    return out
