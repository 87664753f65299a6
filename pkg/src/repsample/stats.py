"""Small statistics toolbox: Welch and paired t-tests, Benjamini-Hochberg FDR.

Degenerate zero-variance cases follow fixed conventions: identical samples
give p = 1, a nonzero mean difference with zero variance gives p = 0.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import t as t_dist

from .errors import ConfigError


def welch_t_test(a, b):
    """Two-sided Welch (unequal-variance) t-test of mean equality.

    Returns (t, p, df).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ConfigError("welch_t_test needs at least 2 values per group")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    sa, sb = va / len(a), vb / len(b)
    if sa + sb == 0.0:
        if ma == mb:
            return 0.0, 1.0, float(len(a) + len(b) - 2)
        return math.copysign(math.inf, ma - mb), 0.0, float(len(a) + len(b) - 2)
    t = (ma - mb) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    p = 2.0 * float(t_dist.sf(abs(t), df))
    return float(t), p, float(df)


def paired_t_test(a, b) -> dict:
    """Two-sided paired t-test on the per-pair differences a - b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or len(a) < 2:
        raise ConfigError("paired_t_test needs two equal-length vectors with >= 2 entries")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    n = len(d)
    if sd == 0.0:
        if mean == 0.0:
            return {"t": 0.0, "p": 1.0}
        return {"t": math.copysign(math.inf, mean), "p": 0.0}
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(t_dist.sf(abs(t), n - 1))
    return {"t": float(t), "p": p}


def bh_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values (monotone, clipped at 1),
    returned in the original order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ConfigError("bh_adjust takes a nonempty 1-D array")
    if np.any((p < 0.0) | (p > 1.0)):
        raise ConfigError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adjusted, 1.0)
    return out
