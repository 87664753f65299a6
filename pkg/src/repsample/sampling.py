"""Sampling strategies: simple random, proportional stratified (the miniature),
kNN-density weighted, and dual-representation k-DPP (the coverage samplers).

All samplers are pure functions of (dataset, params, seed): the same inputs
reproduce the same SampleIndex, and different draws may run in parallel with
seeds derived per task (see seeding.derive_seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .dataset import FeatureMatrix, SampleIndex, TabularDataset
from .errors import ConfigError, DataError
from .seeding import derive_seed

DEFAULT_AGE_BINS = (0.0, 33.0, 66.0, 99.0)
EIGENVALUE_FLOOR = 1e-9


def _provenance(name: str, seed: int, **params) -> dict:
    return {"sampler_name": name, "seed": int(seed), "parameters": params}


def _check_size(size: int, n: int) -> None:
    if not 0 < size <= n:
        raise ConfigError(f"sample size {size} must be in 1..{n}")


def sample_simple_random(ds: TabularDataset, size: int, seed: int) -> SampleIndex:
    """Uniform draw of `size` distinct rows."""
    _check_size(size, ds.n_rows)
    rng = np.random.default_rng(seed)
    idx = rng.permutation(ds.n_rows)[:size]
    return SampleIndex(ds.source_id, idx, _provenance("srs", seed, size=size))


# -- stratified (miniature) ------------------------------------------------


@dataclass(frozen=True)
class StrataPartition:
    """Disjoint, exhaustive partition of rows by crossed categorical/binned keys."""

    keys: tuple[str, ...]
    bin_edges: dict
    cells: dict

    def __post_init__(self):
        total = sum(len(v) for v in self.cells.values())
        seen = np.concatenate([v for v in self.cells.values()]) if self.cells else np.array([], dtype=np.int64)
        if len(np.unique(seen)) != total:
            raise DataError("strata cells overlap")
        object.__setattr__(self, "_n_rows", total)

    @property
    def n_rows(self) -> int:
        return self._n_rows

    def cell_sizes(self) -> dict:
        return {k: len(v) for k, v in self.cells.items()}


def _bin_labels(edges) -> list[str]:
    labels = []
    for i in range(len(edges) - 1):
        close = "]" if i == len(edges) - 2 else ")"
        labels.append(f"[{edges[i]:g},{edges[i + 1]:g}{close}")
    return labels


def build_strata(ds: TabularDataset, keys, bins=None) -> StrataPartition:
    """Cross-stratify on `keys`; continuous keys need bin edges in `bins`.

    Values beyond the outermost edges are clamped into the first/last bin.
    Only observed (nonempty) cells appear in the partition.
    """
    bins = dict(bins or {})
    if not keys:
        raise ConfigError("at least one stratification key required")
    label_arrays = []
    used_edges = {}
    for key in keys:
        spec = ds.spec(key)
        if spec.is_categorical:
            label_arrays.append(ds.category_labels(key))
        else:
            if key not in bins:
                raise ConfigError(f"continuous key {key!r} needs bin edges")
            edges = np.asarray(bins[key], dtype=np.float64)
            if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
                raise ConfigError(f"bin edges for {key!r} must be increasing with >= 2 values")
            used_edges[key] = tuple(float(e) for e in edges)
            pos = np.clip(np.searchsorted(edges, ds.columns[key], side="right") - 1, 0, len(edges) - 2)
            label_arrays.append(np.asarray(_bin_labels(edges), dtype=object)[pos])
    cells: dict[tuple, list] = {}
    for i in range(ds.n_rows):
        key = tuple(str(a[i]) for a in label_arrays)
        cells.setdefault(key, []).append(i)
    cells = {k: np.asarray(v, dtype=np.int64) for k, v in sorted(cells.items())}
    return StrataPartition(tuple(keys), used_edges, cells)


def allocate_largest_remainder(counts, size: int) -> np.ndarray:
    """Proportional integer allocation by the largest-remainder rule.

    Allocations sum to `size`, never exceed per-cell counts, and satisfy
    |allocation/size - count/total| <= 1/size for every cell.
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = counts.sum()
    if not 0 < size <= total:
        raise ConfigError(f"allocation size {size} must be in 1..{total}")
    quotas = size * counts / total
    alloc = np.floor(quotas).astype(np.int64)
    remaining = size - alloc.sum()
    order = np.lexsort((np.arange(len(counts)), -(quotas - np.floor(quotas))))
    while remaining > 0:
        progressed = False
        for i in order:
            if remaining == 0:
                break
            if alloc[i] < counts[i]:
                alloc[i] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            raise RuntimeError("allocation stalled; counts inconsistent with size")
    return alloc


def sample_stratified(ds: TabularDataset, partition: StrataPartition, size: int, seed: int) -> SampleIndex:
    """Proportional stratified draw: largest-remainder allocation per cell,
    simple random sampling inside each cell."""
    _check_size(size, partition.n_rows)
    cells = list(partition.cells.items())
    alloc = allocate_largest_remainder([len(rows) for _, rows in cells], size)
    rng = np.random.default_rng(seed)
    parts = []
    for (_, rows), take in zip(cells, alloc):
        if take:
            parts.append(rows[rng.permutation(len(rows))[:take]])
    idx = np.concatenate(parts) if parts else np.array([], dtype=np.int64)
    return SampleIndex(
        ds.source_id,
        idx,
        _provenance("stratified", seed, size=size, keys=list(partition.keys)),
    )


# -- density-weighted (coverage sampler #1) ---------------------------------


@dataclass(frozen=True)
class DensityWeights:
    """Per-row sampling weights proportional to mean kNN distance^temperature."""

    k: int
    weights: np.ndarray
    distances: np.ndarray
    temperature: float
    uniform_fallback: bool = False


def compute_density_weights(fm: FeatureMatrix, k: int = 5, temperature: float = 1.0) -> DensityWeights:
    """Weight each row by its mean Euclidean distance to the k nearest other rows.

    Low-density rows (large mean distance) get high weight. A duplicate-only
    matrix where every distance is zero falls back to uniform weights.
    """
    n = fm.n_rows
    if not 1 <= k < n:
        raise ConfigError(f"neighbor count k={k} must satisfy 1 <= k < n={n}")
    if temperature < 0:
        raise ConfigError("temperature must be nonnegative")
    dists, _ = cKDTree(fm.values).query(fm.values, k=k + 1)
    mean_dist = dists[:, 1:].mean(axis=1)
    if np.all(mean_dist == 0.0):
        w = np.full(n, 1.0 / n)
        return DensityWeights(k, w, mean_dist, temperature, uniform_fallback=True)
    if temperature == 0.0:
        w = np.full(n, 1.0 / n)
    else:
        w = mean_dist**temperature
        w = w / w.sum()
    return DensityWeights(k, w, mean_dist, temperature)


def sample_density(ds: TabularDataset, weights: DensityWeights, size: int, seed: int) -> SampleIndex:
    """Weighted draw without replacement: sequential draws from the
    renormalized residual weights."""
    n = len(weights.weights)
    if n != ds.n_rows:
        raise ConfigError("weights were computed for a different number of rows")
    _check_size(size, n)
    positive = int(np.count_nonzero(weights.weights > 0))
    if size > positive:
        raise DataError(
            f"size {size} exceeds the {positive} rows with positive weight"
        )
    rng = np.random.default_rng(seed)
    idx = _kernels.weighted_wor(weights.weights, size, rng.random(size))
    return SampleIndex(
        ds.source_id,
        idx,
        _provenance(
            "density", seed, size=size, k=weights.k, temperature=weights.temperature
        ),
    )


# -- k-DPP (coverage sampler #2) ---------------------------------------------


class KdppRankError(ConfigError):
    """Requested subset size exceeds the kernel's effective rank."""


@dataclass(frozen=True)
class DppKernel:
    """Dual representation of a linear-kernel L-ensemble.

    dual_matrix is the p x p Gramian of feature directions (feature vectors as
    columns of the p x n data matrix); its nonzero spectrum equals that of the
    n x n L-ensemble, which is why sampling can work entirely in p dimensions.
    """

    dual_matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    matrix: FeatureMatrix

    def __post_init__(self):
        ev = self.eigenvalues
        if np.any(np.diff(ev) > 0):
            raise DataError("eigenvalues must be nonincreasing")
        if np.any(ev < 0):
            raise DataError("eigenvalues must be clamped to >= 0")
        recon = (self.eigenvectors * ev) @ self.eigenvectors.T
        scale = np.abs(self.dual_matrix).max() or 1.0
        if np.abs(recon - self.dual_matrix).max() >= 1e-8 * scale:
            raise DataError("eigendecomposition does not reconstruct the dual matrix")

    @property
    def effective_rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues > EIGENVALUE_FLOOR))


def _dual_eig(values: np.ndarray):
    """Eigendecomposition of the p x p dual Gramian of an n x p matrix,
    eigenvalues nonincreasing and clamped at zero."""
    dual = values.T @ values
    eigvals, eigvecs = np.linalg.eigh(dual)
    eigvals = eigvals[::-1].copy()
    eigvecs = eigvecs[:, ::-1].copy()
    if eigvals.size and eigvals.min() < -1e-9 * max(1.0, abs(eigvals[0])):
        raise DataError("dual matrix is not PSD within tolerance")
    np.clip(eigvals, 0.0, None, out=eigvals)
    return dual, eigvals, eigvecs


def build_dpp_kernel(fm: FeatureMatrix) -> DppKernel:
    dual, eigvals, eigvecs = _dual_eig(fm.values)
    return DppKernel(dual, eigvals, eigvecs, fm)


def elementary_symmetric(values, k: int) -> float:
    """e_k of `values` via the standard recurrence (exposed for verification)."""
    table = _esp_table(np.asarray(values, dtype=np.float64), k)
    return float(table[k, len(values)])


def _esp_table(lams: np.ndarray, k: int) -> np.ndarray:
    """table[l, m] = e_l(lams[:m]); computed row by row."""
    r = len(lams)
    table = np.zeros((k + 1, r + 1))
    table[0, :] = 1.0
    for l in range(1, k + 1):
        for m in range(1, r + 1):
            table[l, m] = table[l, m - 1] + lams[m - 1] * table[l - 1, m - 1]
    return table


def _select_eigen_subset(eigvals: np.ndarray, k: int, uniforms: np.ndarray) -> np.ndarray:
    """Draw an eigenvalue subset of size k with probability proportional to
    the product of the selected eigenvalues (k-DPP phase one).

    Eigenvalues are rescaled by their maximum before the elementary-symmetric
    recurrence; selection ratios are invariant to that rescaling.
    """
    r = len(eigvals)
    lams = eigvals / eigvals.max()
    table = _esp_table(lams, k)
    selected = []
    need = k
    for m in range(r, 0, -1):
        if need == 0:
            break
        u = uniforms[r - m]
        if need == m:
            take = True  # all remaining eigenvalues are forced
        elif table[need, m] <= 0.0:
            take = False
        else:
            take = u < lams[m - 1] * table[need - 1, m - 1] / table[need, m]
        if take:
            selected.append(m - 1)
            need -= 1
    return np.asarray(selected[::-1], dtype=np.int64)


def _draw_kdpp(values: np.ndarray, eigvals: np.ndarray, eigvecs: np.ndarray, k: int, rng) -> np.ndarray:
    """One exact k-DPP draw via the dual algorithm; returns row indices."""
    rank = int(np.count_nonzero(eigvals > EIGENVALUE_FLOOR))
    uniforms = rng.random(rank + k)
    sel = _select_eigen_subset(eigvals[:rank], k, uniforms[:rank])
    scaled = eigvecs[:, sel] / np.sqrt(eigvals[sel])
    M = np.ascontiguousarray((values @ scaled).T)
    return _kernels.kdpp_items(M, uniforms[rank : rank + k])


def sample_kdpp(ds: TabularDataset, kernel: DppKernel, k: int, seed: int) -> SampleIndex:
    """Draw a size-k subset with probability proportional to the determinant
    of its feature Gramian (geometric diversity squared)."""
    if kernel.matrix.n_rows != ds.n_rows:
        raise ConfigError("kernel was built from a different number of rows")
    rank = kernel.effective_rank
    if not 0 < k <= rank:
        raise KdppRankError(
            f"k={k} exceeds the kernel's effective rank {rank}; a linear kernel on "
            f"p={kernel.dual_matrix.shape[0]} encoded features supports at most rank-many items"
        )
    rng = np.random.default_rng(seed)
    idx = _draw_kdpp(kernel.matrix.values, kernel.eigenvalues, kernel.eigenvectors, k, rng)
    return SampleIndex(ds.source_id, idx, _provenance("kdpp", seed, k=k))


def sample_kdpp_repeated(ds: TabularDataset, fm: FeatureMatrix, size: int, seed: int) -> SampleIndex:
    """Build a size-`size` sample from successive k-DPP draws.

    A linear kernel caps any single draw at the feature rank, so larger samples
    stitch together draws of rank-many items, each over the rows not yet
    chosen (rebuilding the dual kernel each round). If the remaining rows lose
    all rank (only zero feature vectors left), the tail is filled uniformly.
    """
    _check_size(size, ds.n_rows)
    remaining = np.arange(ds.n_rows)
    chosen: list[np.ndarray] = []
    taken = 0
    rounds = 0
    while taken < size:
        sub = fm.values[remaining]
        _, eigvals, eigvecs = _dual_eig(sub)
        rank = int(np.count_nonzero(eigvals > EIGENVALUE_FLOOR))
        rng = np.random.default_rng(derive_seed(seed, "kdpp-round", rounds))
        if rank == 0:
            fill = rng.permutation(len(remaining))[: size - taken]
            chosen.append(remaining[fill])
            taken += len(fill)
            break
        k = min(rank, size - taken)
        local = _draw_kdpp(sub, eigvals, eigvecs, k, rng)
        chosen.append(remaining[local])
        taken += k
        mask = np.ones(len(remaining), dtype=bool)
        mask[local] = False
        remaining = remaining[mask]
        rounds += 1
    idx = np.concatenate(chosen)
    return SampleIndex(
        ds.source_id,
        idx,
        _provenance("kdpp", seed, k=size, rounds=rounds),
    )
