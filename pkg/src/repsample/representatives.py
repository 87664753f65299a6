"""Representatives: a typical exemplar per subgroup plus its representativeness.

The center of a group is the per-feature mean (or median, by flag) for
continuous features and the mode for categorical ones. Representativeness is
the group's dispersion: mean squared distance of the members to the center in
the standardized encoded feature space. The medoid is the actual group member
nearest to the center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FeatureMatrix, TabularDataset
from .errors import ConfigError, DataError
from .sampling import build_strata


@dataclass(frozen=True)
class GroupRepresentative:
    group_key: tuple[str, ...]
    center: dict
    medoid_index: int
    dispersion: float
    size: int

    def to_json(self) -> dict:
        return {
            "group": list(self.group_key),
            "center": self.center,
            "medoid_index": self.medoid_index,
            "dispersion": self.dispersion,
            "size": self.size,
        }


def _encode_center(center: dict, ds: TabularDataset, fm: FeatureMatrix) -> np.ndarray:
    vec = np.zeros(fm.n_cols)
    for f in ds.schema:
        if f.name not in fm.encoding_map:
            continue
        lo, hi = fm.encoding_map[f.name]
        if f.kind == "continuous":
            mu, sd = fm.means[lo], fm.stds[lo]
            vec[lo] = (center[f.name] - mu) / sd if sd > 0 else 0.0
        elif f.kind == "binary":
            vec[lo] = 1.0 if center[f.name] == f.categories[1] else 0.0
        else:
            vec[lo + f.categories.index(center[f.name])] = 1.0
    return vec


def compute_representatives(
    ds: TabularDataset,
    group_by,
    fm: FeatureMatrix,
    center: str = "mean",
    bins=None,
) -> list[GroupRepresentative]:
    """One representative per nonempty group of the crossed `group_by` features."""
    if ds.n_rows == 0:
        raise DataError("empty dataset")
    if center not in ("mean", "median"):
        raise ConfigError(f"unknown center {center!r}; use 'mean' or 'median'")
    if fm.n_rows != ds.n_rows:
        raise ConfigError("feature matrix does not match the dataset")
    partition = build_strata(ds, group_by, bins=bins)
    out = []
    for key, rows in partition.cells.items():
        values = {}
        for f in ds.schema:
            if f.role == "ignored":
                continue
            col = ds.columns[f.name][rows]
            if f.kind == "continuous":
                values[f.name] = float(np.median(col) if center == "median" else col.mean())
            else:
                counts = np.bincount(col, minlength=len(f.categories))
                values[f.name] = f.categories[int(np.argmax(counts))]
        center_vec = _encode_center(values, ds, fm)
        deltas = fm.values[rows] - center_vec
        sq_dist = (deltas**2).sum(axis=1)
        medoid = int(rows[int(np.argmin(sq_dist))])  # ties resolve to the lowest row index
        out.append(
            GroupRepresentative(
                group_key=key,
                center=values,
                medoid_index=medoid,
                dispersion=float(sq_dist.mean()),
                size=int(len(rows)),
            )
        )
    return out
