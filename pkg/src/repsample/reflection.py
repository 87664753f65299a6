"""Reflection metrics: how closely a sample's marginals mimic the population's.

Distributional departure is measured by the two-sample Kolmogorov-Smirnov
statistic (sup-norm of the CDF gap) and the first Wasserstein distance (Earth
Mover Distance), computed exactly in 1-D as the integral of |CDF_a - CDF_b|.
Categorical marginals are compared on the real line through their numeric
category codes, which makes the distance order-sensitive by design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TabularDataset
from .errors import ConfigError, DataError
from .report import MetricReport
from .stats import welch_t_test


@dataclass(frozen=True)
class EmpiricalDistribution1D:
    """One feature's marginal: weighted point masses on the real line.

    Continuous marginals carry one point per observation (uniform weights);
    categorical marginals carry one point per category code with the observed
    share as weight. `n` is the number of observations behind the marginal.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    n: int
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        if self.n == 0:
            raise DataError("empty distribution")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise DataError("weights must sum to 1")
        if np.any(np.diff(self.points) < 0):
            raise DataError("points must be sorted")

    @classmethod
    def from_continuous(cls, values) -> "EmpiricalDistribution1D":
        v = np.sort(np.asarray(values, dtype=np.float64))
        if v.size == 0:
            raise DataError("empty distribution")
        return cls("continuous", v, np.full(v.size, 1.0 / v.size), int(v.size))

    @classmethod
    def from_categorical(cls, codes, categories) -> "EmpiricalDistribution1D":
        codes = np.asarray(codes)
        if codes.size == 0:
            raise DataError("empty distribution")
        counts = np.bincount(codes, minlength=len(categories)).astype(np.float64)
        points = _category_points(categories)
        return cls("categorical", points, counts / counts.sum(), int(codes.size), tuple(categories))

    @classmethod
    def from_feature(cls, ds: TabularDataset, name: str) -> "EmpiricalDistribution1D":
        spec = ds.spec(name)
        if spec.is_categorical:
            return cls.from_categorical(ds.columns[name], spec.categories)
        return cls.from_continuous(ds.columns[name])

    def numeric_values(self) -> np.ndarray:
        """Observation-level numeric values (category codes expanded by count)."""
        if self.kind == "continuous":
            return self.points
        counts = np.rint(self.weights * self.n).astype(np.int64)
        return np.repeat(self.points, counts)


def _category_points(categories) -> np.ndarray:
    """Map category codes to the real line: their numeric value when the codes
    parse as numbers, else their declared position."""
    try:
        pts = np.asarray([float(c) for c in categories])
    except ValueError:
        pts = np.arange(len(categories), dtype=np.float64)
    if np.any(np.diff(pts) < 0):
        order_note = "category codes must be in nondecreasing numeric order"
        raise ConfigError(order_note)
    return pts


def _check_comparable(a: EmpiricalDistribution1D, b: EmpiricalDistribution1D) -> None:
    if a.kind != b.kind:
        raise ConfigError(f"cannot compare {a.kind} with {b.kind} distribution")
    if a.kind == "categorical" and a.categories != b.categories:
        raise ConfigError("categorical distributions must share the same ordered codes")


def _cdf_at(dist: EmpiricalDistribution1D, grid: np.ndarray) -> np.ndarray:
    cum = np.concatenate([[0.0], np.cumsum(dist.weights)])
    return cum[np.searchsorted(dist.points, grid, side="right")]


def _cdf_grid(a: EmpiricalDistribution1D, b: EmpiricalDistribution1D):
    """CDFs of both distributions evaluated on the merged support."""
    grid = np.union1d(a.points, b.points)
    return grid, _cdf_at(a, grid), _cdf_at(b, grid)


def ks_statistic(a: EmpiricalDistribution1D, b: EmpiricalDistribution1D) -> float:
    """Sup-norm distance between the two empirical CDFs, in [0, 1]."""
    _check_comparable(a, b)
    _, fa, fb = _cdf_grid(a, b)
    return float(np.abs(fa - fb).max())


def wasserstein1(a: EmpiricalDistribution1D, b: EmpiricalDistribution1D) -> float:
    """Exact first Wasserstein distance: integral of |CDF_a - CDF_b| over the
    merged support (equal to the minimum transport cost for |x - y|)."""
    _check_comparable(a, b)
    grid, fa, fb = _cdf_grid(a, b)
    if grid.size < 2:
        return 0.0
    return float(np.sum(np.abs(fa[:-1] - fb[:-1]) * np.diff(grid)))


def mean_comparison(sample_values, population_values) -> dict:
    """Welch two-sided t-test of mean equality between sample and population."""
    t, p, _ = welch_t_test(sample_values, population_values)
    mean_diff = float(np.mean(sample_values) - np.mean(population_values))
    return {"t_statistic": t, "p_value": p, "mean_diff": mean_diff}


def reflection_report(sample: TabularDataset, population: TabularDataset, features) -> list[MetricReport]:
    """Per-feature KS, Earth Mover Distance, and mean comparison between a
    sample and its population. Lower distances mean stronger reflection."""
    if sample.schema != population.schema:
        raise ConfigError("sample and population schemas differ")
    reports = []
    for name in features:
        da = EmpiricalDistribution1D.from_feature(sample, name)
        db = EmpiricalDistribution1D.from_feature(population, name)
        reports.append(MetricReport("ks", ks_statistic(da, db), feature=name))
        reports.append(MetricReport("emd", wasserstein1(da, db), feature=name))
        mc = mean_comparison(da.numeric_values(), db.numeric_values())
        reports.append(
            MetricReport(
                "mean_diff",
                mc["mean_diff"],
                feature=name,
                details={"t_statistic": mc["t_statistic"], "p_value": mc["p_value"]},
            )
        )
    return reports
