"""Pure-numpy kernels: reference implementations of the hot sampling loops.

Both backends consume a pre-drawn array of uniforms and must walk it in the
same order, so a given seed selects the same rows regardless of backend. All
accumulations that decide an index (cumulative sums, sums of squares) run in
ascending element order to match the compiled kernels bit for bit.
"""

import numpy as np


def _pick(cum: np.ndarray, weights: np.ndarray, target: float) -> int:
    """First index with cumsum > target; falls back to the last positive weight."""
    i = int(np.searchsorted(cum, target, side="right"))
    if i >= len(cum):
        pos = np.flatnonzero(weights > 0.0)
        if pos.size == 0:
            raise RuntimeError("no positive weights left to draw from")
        i = int(pos[-1])
    return i


def weighted_wor(weights: np.ndarray, size: int, uniforms: np.ndarray) -> np.ndarray:
    """Sequential weighted draws without replacement.

    Each step draws one index from the residual weights renormalized to sum 1,
    then zeroes it out. `uniforms` supplies one uniform per draw.
    """
    w = np.array(weights, dtype=np.float64)
    out = np.empty(size, dtype=np.int64)
    for s in range(size):
        cum = np.cumsum(w)
        total = cum[-1]
        if total <= 0.0:
            raise RuntimeError("total weight exhausted before reaching the requested size")
        i = _pick(cum, w, uniforms[s] * total)
        out[s] = i
        w[i] = 0.0
    return out


def kdpp_items(M: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Sequential item selection for a dual-representation k-DPP draw.

    M holds one row per selected eigendirection, M[t, i] = v_t . b_i where the
    rows are orthonormal under the kernel inner product (which equals the
    plain dot product of M rows). Draws exactly M.shape[0] items; M is
    consumed in place. `uniforms` supplies one uniform per item.
    """
    m, n = M.shape
    out = np.empty(m, dtype=np.int64)
    for step in range(m):
        probs = np.zeros(n)
        for t in range(m - step):
            probs += M[t] * M[t]
        cum = np.cumsum(probs)
        total = cum[-1]
        if total <= 0.0:
            raise RuntimeError("degenerate k-DPP state: zero selection mass")
        i = _pick(cum, probs, uniforms[step] * total)
        out[step] = i

        active = m - step
        t0 = int(np.argmax(np.abs(M[:active, i])))
        pivot = M[t0, i]
        for t in range(active):
            if t != t0 and M[t, i] != 0.0:
                M[t] -= (M[t, i] / pivot) * M[t0]
        M[t0] = M[active - 1]
        active -= 1

        # re-orthonormalize the surviving rows (Gram-Schmidt in M-row space)
        for s in range(active):
            for t in range(s):
                M[s] -= np.dot(M[s], M[t]) * M[t]
            norm = np.sqrt(np.dot(M[s], M[s]))
            if norm > 1e-12:
                M[s] /= norm
            else:
                M[s] = 0.0
    return out
