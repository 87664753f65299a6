"""Fairness disparity measures over model predictions.

Regression metrics: demographic disparity (RDD) as the sup-norm gap between
the prediction CDFs of two protected groups, and equalized-odds disparity
(REOD) which compares the observed triple (predictions, groups, outcomes)
against fair-dummy triples where group labels are reshuffled within outcome
bins, making them independent of predictions given the outcome.

Classification metrics: demographic disparity (CDD) as the positive-rate gap
and equal-opportunity disparity (CEOD) as the true-positive-rate gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .reflection import EmpiricalDistribution1D, ks_statistic
from .seeding import derive_seed


@dataclass(frozen=True)
class PredictionTriple:
    """Aligned predictions, targets, and protected group labels."""

    y_hat: np.ndarray
    y: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        y_hat = np.asarray(self.y_hat, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        a = np.asarray(self.a)
        if not (len(y_hat) == len(y) == len(a)):
            raise ConfigError("y_hat, y, a must have equal lengths")
        if len(y_hat) < 2:
            raise ConfigError("need at least 2 observations")
        object.__setattr__(self, "y_hat", y_hat)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)

    def group_mask(self, group) -> np.ndarray:
        mask = self.a == np.asarray(group, dtype=self.a.dtype)
        if not mask.any():
            raise DataError(f"protected group {group!r} is absent")
        return mask


@dataclass(frozen=True)
class FairDummies:
    """Group labels reshuffled within outcome-quantile bins.

    Within each bin the reshuffled labels are a permutation of the observed
    ones, so the triple (predictions, dummies, outcomes) satisfies equalized
    odds by construction while group marginals are preserved exactly.
    """

    a_tilde: np.ndarray
    bins: np.ndarray
    seed: int
    n_bins_used: int
    bin_of: np.ndarray


def _ks_values(x0: np.ndarray, x1: np.ndarray) -> float:
    return ks_statistic(
        EmpiricalDistribution1D.from_continuous(x0),
        EmpiricalDistribution1D.from_continuous(x1),
    )


def rdd(pt: PredictionTriple, group0, group1, mode: str = "pair") -> float:
    """Regression demographic disparity: KS distance between the prediction
    CDFs of the two designated groups ('pair'), or the max KS of each group's
    CDF against the pooled CDF ('pooled', for more than two groups)."""
    if mode == "pair":
        m0, m1 = pt.group_mask(group0), pt.group_mask(group1)
        return _ks_values(pt.y_hat[m0], pt.y_hat[m1])
    if mode == "pooled":
        return max(
            _ks_values(pt.y_hat[pt.group_mask(g)], pt.y_hat) for g in (group0, group1)
        )
    raise ConfigError(f"unknown rdd mode {mode!r}")


def make_fair_dummies(pt: PredictionTriple, n_bins: int = 10, seed: int = 0) -> FairDummies:
    """Discretize the outcomes into quantile bins and permute the group labels
    uniformly within each bin. Duplicate quantile edges merge bins; the count
    actually used is reported on the result."""
    n = len(pt.y)
    if not 2 <= n_bins <= n:
        raise ConfigError(f"n_bins={n_bins} must be in 2..{n}")
    edges = np.unique(np.quantile(pt.y, np.linspace(0.0, 1.0, n_bins + 1)))
    inner = edges[1:-1]
    bin_of = np.searchsorted(inner, pt.y, side="right")
    n_used = int(bin_of.max()) + 1
    rng = np.random.default_rng(seed)
    a_tilde = pt.a.copy()
    for b in range(n_used):
        members = np.flatnonzero(bin_of == b)
        a_tilde[members] = pt.a[members][rng.permutation(len(members))]
    return FairDummies(a_tilde, edges, int(seed), n_used, bin_of)


def reod_detail(pt: PredictionTriple, fd: FairDummies, group0, group1, n_resamples: int = 10) -> dict:
    """REOD with cell-coverage accounting.

    For each dummy resample, take the max over outcome bins and over the two
    groups of the KS distance between observed-group and dummy-group
    prediction CDFs; average the maxima over resamples. Cells where either
    side is empty are skipped and counted against coverage.
    """
    if len(fd.a_tilde) != len(pt.a):
        raise ConfigError("fair dummies were built from a different triple")
    if n_resamples < 1:
        raise ConfigError("n_resamples must be >= 1")
    pt.group_mask(group0)
    pt.group_mask(group1)
    maxima = []
    coverages = []
    for r in range(n_resamples):
        dummies = fd if r == 0 else make_fair_dummies(
            pt, n_bins=len(fd.bins) - 1, seed=derive_seed(fd.seed, "reod-resample", r)
        )
        worst = 0.0
        evaluated = 0
        total = 0
        for b in range(dummies.n_bins_used):
            in_bin = dummies.bin_of == b
            for g in (group0, group1):
                total += 1
                observed = pt.y_hat[in_bin & (pt.a == g)]
                dummy = pt.y_hat[in_bin & (dummies.a_tilde == g)]
                if observed.size == 0 or dummy.size == 0:
                    continue
                evaluated += 1
                worst = max(worst, _ks_values(observed, dummy))
        maxima.append(worst)
        coverages.append(evaluated / total if total else 0.0)
    return {
        "value": float(np.mean(maxima)),
        "cell_coverage": float(np.mean(coverages)),
        "n_resamples": n_resamples,
    }


def reod(pt: PredictionTriple, fd: FairDummies, group0, group1, n_resamples: int = 10) -> float:
    """Regression equalized-odds disparity in [0, 1]."""
    return reod_detail(pt, fd, group0, group1, n_resamples)["value"]


def _require_binary(values: np.ndarray, name: str) -> None:
    if not np.isin(values, (0.0, 1.0)).all():
        raise ConfigError(f"{name} must be binary 0/1")


def cdd(pt: PredictionTriple, group0, group1) -> float:
    """Classification demographic disparity: |positive rate gap| between groups."""
    _require_binary(pt.y_hat, "predictions")
    m0, m1 = pt.group_mask(group0), pt.group_mask(group1)
    return abs(float(pt.y_hat[m0].mean() - pt.y_hat[m1].mean()))


def ceod(pt: PredictionTriple, group0, group1) -> float:
    """Classification equal-opportunity disparity: |true positive rate gap|."""
    _require_binary(pt.y_hat, "predictions")
    _require_binary(pt.y, "targets")
    rates = []
    for g in (group0, group1):
        mask = pt.group_mask(g) & (pt.y == 1.0)
        if not mask.any():
            raise DataError(f"group {g!r} has no positive outcomes; TPR undefined")
        rates.append(float(pt.y_hat[mask].mean()))
    return abs(rates[0] - rates[1])
