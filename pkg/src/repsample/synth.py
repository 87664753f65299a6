"""Synthetic tabular populations for desk-scale experiments.

A population has a long-tail group structure (the race analog), a binary
feature, per-group multivariate-normal continuous features, and a linear
target with optional group-specific intercept and slope offsets. The offsets
make a main-effects linear model misspecified, which is what lets sampling
strategy change model behavior. Shift profiles derive additional "states"
with tilted group proportions and shifted feature means.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import FeatureSpec, TabularDataset
from .errors import ConfigError
from .seeding import derive_seed


@dataclass(frozen=True)
class StateShift:
    """Derived state: new group proportions and/or global feature-mean shift."""

    name: str
    n: int
    proportions: tuple | None = None
    mean_shift: tuple | None = None


@dataclass
class SyntheticPopulationSpec:
    n: int
    proportions: tuple
    group_means: tuple  # per group, per continuous feature
    group_covs: tuple  # per group, full covariance matrix
    binary_p: tuple  # per group, P(flag = "1")
    base_intercept: float
    slopes: tuple  # shared slopes on continuous features
    binary_effect: float
    group_intercepts: tuple
    group_slopes: tuple  # per group slope offsets (misspecification)
    noise_sd: float
    base_name: str = "base"
    continuous_features: tuple = ("x1", "x2")
    shifts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        k = len(self.proportions)
        d = len(self.continuous_features)
        if abs(sum(self.proportions) - 1.0) > 1e-9:
            raise ConfigError("group proportions must sum to 1")
        if any(p <= 0 for p in self.proportions):
            raise ConfigError("group proportions must be positive")
        for name, seq in (
            ("group_means", self.group_means),
            ("group_covs", self.group_covs),
            ("binary_p", self.binary_p),
            ("group_intercepts", self.group_intercepts),
            ("group_slopes", self.group_slopes),
        ):
            if len(seq) != k:
                raise ConfigError(f"{name} must have one entry per group ({k})")
        if len(self.slopes) != d:
            raise ConfigError("slopes must match the continuous features")
        for cov in self.group_covs:
            c = np.asarray(cov, dtype=np.float64)
            if c.shape != (d, d):
                raise ConfigError("each covariance must be d x d")
            eigvals = np.linalg.eigvalsh((c + c.T) / 2)
            if eigvals.min() < -1e-9:
                raise ConfigError("covariance matrices must be PSD")
        for shift in self.shifts:
            if shift.proportions is not None:
                if len(shift.proportions) != k or abs(sum(shift.proportions) - 1.0) > 1e-9:
                    raise ConfigError(f"shift {shift.name!r}: bad proportions")
            if shift.mean_shift is not None and len(shift.mean_shift) != d:
                raise ConfigError(f"shift {shift.name!r}: mean_shift must match features")

    @property
    def n_groups(self) -> int:
        return len(self.proportions)

    def group_categories(self) -> tuple:
        return tuple(str(i + 1) for i in range(self.n_groups))

    def schema(self) -> list[FeatureSpec]:
        return [
            FeatureSpec("group", "categorical", self.group_categories(), role="protected"),
            FeatureSpec("flag", "binary", ("0", "1"), role="input"),
            *[FeatureSpec(name, "continuous", role="input") for name in self.continuous_features],
            FeatureSpec("y", "continuous", role="target"),
        ]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "proportions": list(self.proportions),
            "group_means": [list(m) for m in self.group_means],
            "group_covs": [np.asarray(c).tolist() for c in self.group_covs],
            "binary_p": list(self.binary_p),
            "base_intercept": self.base_intercept,
            "slopes": list(self.slopes),
            "binary_effect": self.binary_effect,
            "group_intercepts": list(self.group_intercepts),
            "group_slopes": [list(s) for s in self.group_slopes],
            "noise_sd": self.noise_sd,
            "base_name": self.base_name,
            "continuous_features": list(self.continuous_features),
            "shifts": [
                {
                    "name": s.name,
                    "n": s.n,
                    "proportions": list(s.proportions) if s.proportions is not None else None,
                    "mean_shift": list(s.mean_shift) if s.mean_shift is not None else None,
                }
                for s in self.shifts
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticPopulationSpec":
        try:
            shifts = tuple(
                StateShift(
                    s["name"],
                    s["n"],
                    tuple(s["proportions"]) if s.get("proportions") is not None else None,
                    tuple(s["mean_shift"]) if s.get("mean_shift") is not None else None,
                )
                for s in obj.get("shifts", [])
            )
            return cls(
                n=obj["n"],
                proportions=tuple(obj["proportions"]),
                group_means=tuple(tuple(m) for m in obj["group_means"]),
                group_covs=tuple(tuple(map(tuple, c)) for c in obj["group_covs"]),
                binary_p=tuple(obj["binary_p"]),
                base_intercept=obj["base_intercept"],
                slopes=tuple(obj["slopes"]),
                binary_effect=obj["binary_effect"],
                group_intercepts=tuple(obj["group_intercepts"]),
                group_slopes=tuple(tuple(s) for s in obj["group_slopes"]),
                noise_sd=obj["noise_sd"],
                base_name=obj.get("base_name", "base"),
                continuous_features=tuple(obj.get("continuous_features", ("x1", "x2"))),
                shifts=shifts,
            )
        except KeyError as e:
            raise ConfigError(f"synthetic spec is missing key {e}") from None


DEFAULT_PROPORTIONS = (0.34, 0.18, 0.11, 0.09, 0.07, 0.06, 0.05, 0.05, 0.05)
_TAIL_HEAVY_A = (0.05, 0.05, 0.05, 0.06, 0.07, 0.09, 0.12, 0.17, 0.34)
_TAIL_HEAVY_B = (0.04, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.20, 0.22)


def default_population_spec(n: int = 20_000, shifts: tuple = ()) -> SyntheticPopulationSpec:
    """Desk-scale 9-group long-tail population.

    Group means advance along x1 with the shared slope; rare groups have wide
    x2 spread (so low-density sampling reaches for them) and flat x1 relations
    (so a main-effects model fitted to a coverage sample attenuates the slope
    the majority follows). Group mean outcomes stay on the shared slope line,
    which keeps a group-blind linear model well specified at the group level.
    """
    props = DEFAULT_PROPORTIONS
    k = len(props)
    s_u, sv_lo, sv_pow, rarity_cap = 0.45, 0.38, 2.0, 3.5
    m_step, flat = 0.15, 1.0
    beta = (1.0, 0.25)
    means, covs, gslopes, icepts = [], [], [], []
    for g in range(k):
        rarity = min(props[0] / props[g], rarity_cap)
        means.append((m_step * g, 0.0))
        s_v = sv_lo * rarity**sv_pow
        covs.append(((s_u**2, 0.0), (0.0, s_v**2)))
        f = (g / (k - 1)) ** 1.5 * flat
        gslopes.append((-f * beta[0], 0.0))
        icepts.append((m_step * g) * f * beta[0])
    return SyntheticPopulationSpec(
        n=n,
        proportions=props,
        group_means=tuple(means),
        group_covs=tuple(covs),
        binary_p=tuple(0.4 + 0.02 * g for g in range(k)),
        base_intercept=1.0,
        slopes=beta,
        binary_effect=0.3,
        group_intercepts=tuple(icepts),
        group_slopes=tuple(gslopes),
        noise_sd=0.5,
        shifts=shifts,
    )


def default_ood_spec(n: int = 20_000, state_n: int = 6_000) -> SyntheticPopulationSpec:
    """Six-state universe: two states like the base population, four with
    tail-heavy group mixtures (and mild feature shifts)."""
    shifts = (
        StateShift("similar-1", state_n, None, None),
        StateShift("similar-2", state_n, None, (0.05, 0.0)),
        StateShift("shifted-1", state_n, _TAIL_HEAVY_A, None),
        StateShift("shifted-2", state_n, _TAIL_HEAVY_B, (0.3, 0.0)),
        StateShift("shifted-3", state_n, _TAIL_HEAVY_A, (-0.3, 0.0)),
        StateShift("shifted-4", state_n, _TAIL_HEAVY_B, None),
    )
    return default_population_spec(n=n, shifts=shifts)


def _generate_state(spec: SyntheticPopulationSpec, name, n, proportions, mean_shift, seed) -> TabularDataset:
    rng = np.random.default_rng(seed)
    k = spec.n_groups
    d = len(spec.continuous_features)
    shift = np.zeros(d) if mean_shift is None else np.asarray(mean_shift, dtype=np.float64)
    groups = rng.choice(k, size=n, p=np.asarray(proportions))
    x = np.empty((n, d))
    flag = np.empty(n, dtype=np.int32)
    for g in range(k):
        members = np.flatnonzero(groups == g)
        if members.size == 0:
            continue
        chol = np.linalg.cholesky(
            np.asarray(spec.group_covs[g], dtype=np.float64) + 1e-12 * np.eye(d)
        )
        z = rng.standard_normal((members.size, d))
        x[members] = np.asarray(spec.group_means[g]) + shift + z @ chol.T
        flag[members] = (rng.random(members.size) < spec.binary_p[g]).astype(np.int32)
    slopes = np.asarray(spec.slopes)
    group_slopes = np.asarray(spec.group_slopes)
    y = (
        spec.base_intercept
        + x @ slopes
        + (x * group_slopes[groups]).sum(axis=1)
        + np.asarray(spec.group_intercepts)[groups]
        + spec.binary_effect * flag
        + spec.noise_sd * rng.standard_normal(n)
    )
    columns = {"group": groups.astype(np.int32), "flag": flag, "y": y}
    for j, feat in enumerate(spec.continuous_features):
        columns[feat] = x[:, j]
    return TabularDataset(spec.schema(), columns, source_id=name)


def generate_synthetic_population(spec: SyntheticPopulationSpec, seed: int) -> list[TabularDataset]:
    """Base state plus one dataset per shift profile, deterministic from seed."""
    states = [
        _generate_state(
            spec, spec.base_name, spec.n, spec.proportions, None, derive_seed(seed, "state", spec.base_name)
        )
    ]
    for shift in spec.shifts:
        states.append(
            _generate_state(
                spec,
                shift.name,
                shift.n,
                shift.proportions if shift.proportions is not None else spec.proportions,
                shift.mean_shift,
                derive_seed(seed, "state", shift.name),
            )
        )
    return states


def write_state_csvs(states: list[TabularDataset], out_dir) -> list[Path]:
    """One CSV per state plus a dataset config JSON describing the schema."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for ds in states:
        path = out_dir / f"{ds.source_id}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            names = [f.name for f in ds.schema]
            writer.writerow(names)
            decoded = {
                f.name: (ds.category_labels(f.name) if f.is_categorical else ds.columns[f.name])
                for f in ds.schema
            }
            for i in range(ds.n_rows):
                writer.writerow(
                    [decoded[n][i] if isinstance(decoded[n][i], str) else repr(float(decoded[n][i])) for n in names]
                )
        paths.append(path)
    config = {
        "features": [
            {
                "name": f.name,
                "kind": f.kind,
                **({"categories": list(f.categories)} if f.categories else {}),
                "role": f.role,
            }
            for f in states[0].schema
        ],
        "filters": [],
    }
    cfg_path = out_dir / "dataset_config.json"
    cfg_path.write_text(json.dumps(config, indent=1, sort_keys=True))
    paths.append(cfg_path)
    return paths
