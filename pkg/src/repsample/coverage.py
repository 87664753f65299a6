"""Coverage metrics: combinatorial diversity (Shannon entropy of category
shares, in nats) and geometric diversity (square root of the determinant of
the sample's feature Gramian, i.e. the volume spanned by the feature vectors).

For a sample of n rows in p encoded dimensions the n x n Gramian is singular
whenever n > p, so the p x p dual matrix is used instead; the result is then a
declared proxy rather than the n-volume, and every score carries its basis
tag. Determinants accumulate in the log domain (Cholesky diagonal) because
realistic magnitudes overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import FeatureMatrix, SampleIndex, TabularDataset, extract
from .errors import ConfigError, DataError
from .report import MetricReport


@dataclass(frozen=True)
class DiversityScore:
    geometric_log: float
    geometric: float
    basis: str
    combinatorial: float | None = None


def combinatorial_diversity(sample: TabularDataset, feature: str) -> float:
    """Shannon entropy (nats) of the within-sample category shares."""
    spec = sample.spec(feature)
    if not spec.is_categorical:
        raise ConfigError(f"feature {feature!r} is not categorical")
    if sample.n_rows == 0:
        raise DataError("empty sample")
    counts = np.bincount(sample.columns[feature], minlength=len(spec.categories))
    shares = counts[counts > 0] / sample.n_rows
    return float(-(shares * np.log(shares)).sum())


def _logdet_psd(mat: np.ndarray) -> float:
    """log det of a symmetric PSD matrix via Cholesky; -inf when singular."""
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return -math.inf
    return float(2.0 * np.log(np.diag(chol)).sum())


def geometric_diversity(fm: FeatureMatrix, sample: SampleIndex | None = None) -> DiversityScore:
    """Volume-based diversity of the sample's feature vectors.

    n <= p uses the n x n Gramian of the rows (primal basis, the true
    n-volume); n > p uses the p x p dual matrix. Linearly dependent rows give
    geometric 0 with geometric_log -inf.
    """
    rows = fm.values if sample is None else fm.values[np.asarray(sample.indices)]
    n, p = rows.shape
    if n == 0:
        raise DataError("empty sample")
    if n <= p:
        basis = "primal"
        logdet = _logdet_psd(rows @ rows.T)
    else:
        basis = "dual"
        logdet = _logdet_psd(rows.T @ rows)
    half = 0.5 * logdet
    with np.errstate(over="ignore"):
        value = float(np.exp(half))
    return DiversityScore(geometric_log=half, geometric=value, basis=basis)


def coverage_report(
    ds: TabularDataset,
    sample_sets: list[SampleIndex],
    fm: FeatureMatrix,
    categorical_features,
    force: bool = False,
) -> list[MetricReport]:
    """Per-sample combinatorial and geometric diversity.

    Geometric diversity compares volumes, so samples of different sizes are
    not directly comparable; mixing sizes raises unless `force` is set.
    """
    if not sample_sets:
        raise ConfigError("at least one sample required")
    for s in sample_sets:
        if s.parent_id != ds.source_id:
            raise DataError(f"sample parent {s.parent_id!r} does not match dataset {ds.source_id!r}")
    sizes = {len(s) for s in sample_sets}
    if len(sizes) > 1 and not force:
        raise ConfigError(
            f"geometric diversity across different sample sizes ({sorted(sizes)}) compares "
            "different-dimensional volumes; pass force=True to override"
        )
    reports = []
    for i, s in enumerate(sample_sets):
        condition = s.provenance.get("sampler_name", f"sample{i}")
        sub = extract(ds, s)
        for feature in categorical_features:
            reports.append(
                MetricReport(
                    "combinatorial_diversity",
                    combinatorial_diversity(sub, feature),
                    feature=feature,
                    condition=condition,
                    provenance=s.provenance,
                )
            )
        score = geometric_diversity(fm, s)
        reports.append(
            MetricReport(
                "geometric_diversity_log",
                score.geometric_log,
                condition=condition,
                provenance=s.provenance,
                details={"basis": score.basis, "geometric": score.geometric},
            )
        )
    return reports
