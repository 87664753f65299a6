"""Experiment harness: k-fold cross-validation comparing full-data models with
models trained on miniature/coverage samples, and the out-of-distribution
protocol applying those models to other "states".

Every random draw uses a seed derived from the root seed and task labels, so
fold, sampler, and state computations can run in any order (or in parallel)
without changing a single number. Rerunning a config reproduces its outputs
byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import BACKEND
from .coverage import combinatorial_diversity, geometric_diversity
from .dataset import SampleIndex, TabularDataset, encode_matrix, extract
from .errors import ConfigError, DataError
from .fairness import PredictionTriple, cdd, ceod, make_fair_dummies, rdd, reod_detail
from .modeling import fit_logistic, fit_ols, score
from .reflection import EmpiricalDistribution1D, ks_statistic, wasserstein1
from .report import MetricReport
from .sampling import (
    build_strata,
    compute_density_weights,
    sample_density,
    sample_kdpp_repeated,
    sample_simple_random,
    sample_stratified,
)
from .seeding import derive_seed
from .stats import bh_adjust, paired_t_test

SAMPLER_NAMES = ("srs", "stratified", "density", "kdpp")
FULL_CONDITION = "full_census"


@dataclass
class ExperimentConfig:
    task: str = "regression"
    folds: int = 5
    sample_fraction: float = 0.20
    samplers: tuple = ("stratified", "density", "kdpp")
    seed: int = 0
    protected: dict | None = None  # {"feature", "group_major", "group_minor"}
    strata_keys: tuple | None = None
    strata_bins: dict = field(default_factory=dict)  # feature -> edges list or {"quantiles": m}
    density_k: int = 5
    density_temperature: float = 1.0
    reod_bins: int = 10
    reod_resamples: int = 10
    reflection_features: tuple | None = None
    diversity_features: tuple | None = None
    protected_as_input: bool = True
    target_threshold: float | None = None
    ood_baseline: str = "stratified"
    ood_coverage: str = "density"

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ConfigError("sample_fraction must be in (0, 1]")
        for s in self.samplers:
            if s not in SAMPLER_NAMES:
                raise ConfigError(f"unknown sampler {s!r}; choose from {SAMPLER_NAMES}")
        if self.protected is not None:
            for key in ("feature", "group_major", "group_minor"):
                if key not in self.protected:
                    raise ConfigError(f"protected pairing is missing {key!r}")

    @property
    def model_roles(self) -> tuple:
        return ("input", "protected") if self.protected_as_input else ("input",)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        strata = obj.get("strata", {})
        density = obj.get("density", {})
        reod_cfg = obj.get("reod", {})
        ood = obj.get("ood", {})
        return cls(
            task=obj.get("task", "regression"),
            folds=obj.get("folds", 5),
            sample_fraction=obj.get("sample_fraction", 0.20),
            samplers=tuple(obj.get("samplers", ("stratified", "density", "kdpp"))),
            seed=obj.get("seed", 0),
            protected=obj.get("protected"),
            strata_keys=tuple(strata["keys"]) if "keys" in strata else None,
            strata_bins=strata.get("bins", {}),
            density_k=density.get("k", 5),
            density_temperature=density.get("temperature", 1.0),
            reod_bins=reod_cfg.get("bins", 10),
            reod_resamples=reod_cfg.get("resamples", 10),
            reflection_features=(
                tuple(obj["reflection_features"]) if obj.get("reflection_features") else None
            ),
            diversity_features=(
                tuple(obj["diversity_features"]) if obj.get("diversity_features") else None
            ),
            protected_as_input=obj.get("protected_as_input", True),
            target_threshold=obj.get("target_threshold"),
            ood_baseline=ood.get("baseline", "stratified"),
            ood_coverage=ood.get("coverage", "density"),
        )

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "folds": self.folds,
            "sample_fraction": self.sample_fraction,
            "samplers": list(self.samplers),
            "seed": self.seed,
            "protected": self.protected,
            "strata": {"keys": list(self.strata_keys) if self.strata_keys else None, "bins": self.strata_bins},
            "density": {"k": self.density_k, "temperature": self.density_temperature},
            "reod": {"bins": self.reod_bins, "resamples": self.reod_resamples},
            "reflection_features": list(self.reflection_features) if self.reflection_features else None,
            "diversity_features": list(self.diversity_features) if self.diversity_features else None,
            "protected_as_input": self.protected_as_input,
            "target_threshold": self.target_threshold,
            "ood": {"baseline": self.ood_baseline, "coverage": self.ood_coverage},
        }


@dataclass
class FoldResult:
    fold_id: int
    conditions: dict
    warnings: list

    def to_json(self) -> dict:
        return {"fold_id": self.fold_id, "conditions": self.conditions, "warnings": self.warnings}


@dataclass
class CvResult:
    config: ExperimentConfig
    fold_results: list
    summary: list
    comparisons: list
    samples: list

    def to_json(self) -> dict:
        return {
            "kind": "cv",
            "backend": BACKEND,
            "config": self.config.to_json(),
            "fold_results": [f.to_json() for f in self.fold_results],
            "summary": [r.to_json() for r in self.summary],
            "comparisons": self.comparisons,
            "samples": self.samples,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n")


@dataclass
class OodResult:
    config: ExperimentConfig
    train_state: str
    per_state: list
    samples: list
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": "ood",
            "backend": BACKEND,
            "config": self.config.to_json(),
            "train_state": self.train_state,
            "per_state": self.per_state,
            "samples": self.samples,
            "warnings": self.warnings,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n")

    def per_state_csv(self, path) -> None:
        cols = [
            "state", "in_distribution", "similarity", "mean_improvement_pct",
            "sd", "p", "p_adj", "significant",
        ]
        lines = [",".join(cols)]
        for row in self.per_state:
            lines.append(",".join(str(row[c]) for c in cols))
        Path(path).write_text("\n".join(lines) + "\n")


def fold_splits(n: int, folds: int, seed: int):
    """Shuffled contiguous-block fold assignment; a function of (n, folds, seed)."""
    perm = np.random.default_rng(derive_seed(seed, "folds")).permutation(n)
    out = []
    for f in range(folds):
        lo, hi = f * n // folds, (f + 1) * n // folds
        out.append((np.sort(np.concatenate([perm[:lo], perm[hi:]])), np.sort(perm[lo:hi])))
    return out


def _resolve_strata(cfg: ExperimentConfig, train: TabularDataset):
    keys = cfg.strata_keys
    if keys is None:
        keys = tuple(
            f.name for f in train.schema if f.is_categorical and f.role in ("input", "protected")
        )
        if not keys:
            raise ConfigError("no categorical features available for stratification")
    bins = {}
    for key in keys:
        if train.spec(key).is_categorical:
            continue
        rule = cfg.strata_bins.get(key)
        if rule is None:
            raise ConfigError(f"continuous stratum key {key!r} needs bins in config")
        if isinstance(rule, dict):
            q = int(rule["quantiles"])
            bins[key] = np.quantile(train.columns[key], np.linspace(0.0, 1.0, q + 1))
        else:
            bins[key] = np.asarray(rule, dtype=np.float64)
    return keys, bins


def _draw_sample(cfg, name, train, fm_sample, size, seed) -> SampleIndex:
    if name == "srs":
        return sample_simple_random(train, size, seed)
    if name == "stratified":
        keys, bins = _resolve_strata(cfg, train)
        return sample_stratified(train, build_strata(train, keys, bins), size, seed)
    if name == "density":
        weights = compute_density_weights(fm_sample, cfg.density_k, cfg.density_temperature)
        return sample_density(train, weights, size, seed)
    if name == "kdpp":
        return sample_kdpp_repeated(train, fm_sample, size, seed)
    raise ConfigError(f"unknown sampler {name!r}")


def _target_vector(ds: TabularDataset, cfg: ExperimentConfig) -> np.ndarray:
    target = ds.target_feature
    if target is None:
        raise ConfigError("dataset has no target feature")
    y = ds.columns[target.name]
    if cfg.task == "classification":
        if cfg.target_threshold is None:
            raise ConfigError("classification task needs target_threshold")
        return (y >= cfg.target_threshold).astype(np.float64)
    return np.asarray(y, dtype=np.float64)


def _fit(cfg, fm, y):
    if cfg.task == "regression":
        return fit_ols(fm, y)
    return fit_logistic(fm, y)


def _fairness_metrics(cfg, preds, y_test, a_test, fold, condition, warnings):
    out = {}
    pair = cfg.protected
    pt = PredictionTriple(preds, y_test, a_test)
    g0, g1 = str(pair["group_major"]), str(pair["group_minor"])
    try:
        if cfg.task == "regression":
            out["rdd"] = rdd(pt, g0, g1)
            fd = make_fair_dummies(
                pt, n_bins=cfg.reod_bins, seed=derive_seed(cfg.seed, "reod", fold, condition)
            )
            detail = reod_detail(pt, fd, g0, g1, n_resamples=cfg.reod_resamples)
            out["reod"] = detail["value"]
            out["reod_cell_coverage"] = detail["cell_coverage"]
        else:
            out["cdd"] = cdd(pt, g0, g1)
            out["ceod"] = ceod(pt, g0, g1)
    except DataError as e:
        warnings.append(f"fold {fold} {condition}: fairness skipped ({e})")
    return out


def _core_metric(cfg) -> str:
    return "mse" if cfg.task == "regression" else "accuracy"


def run_cv_experiment(ds: TabularDataset, cfg: ExperimentConfig) -> CvResult:
    """k-fold protocol: per fold, fit a full-data model on the training split,
    draw each configured sample from it, fit per-sample models, and evaluate
    everything on the identical held-out fold."""
    if ds.n_rows < cfg.folds * 2:
        raise DataError("dataset too small for the requested folds")
    protected_feature = cfg.protected["feature"] if cfg.protected else None
    fold_results = []
    sample_provenances: dict[str, dict] = {}
    geometric_basis: dict[str, str] = {}

    for fold, (train_idx, test_idx) in enumerate(fold_splits(ds.n_rows, cfg.folds, cfg.seed)):
        warnings: list[str] = []
        train = extract(ds, SampleIndex(ds.source_id, train_idx, {"sampler_name": "fold"}))
        test = extract(ds, SampleIndex(ds.source_id, test_idx, {"sampler_name": "fold"}))
        fm_sample_train = encode_matrix(train)
        fm_model_train = encode_matrix(train, roles=cfg.model_roles)
        fm_model_test = encode_matrix(test, fit_on=train, roles=cfg.model_roles)
        y_train = _target_vector(train, cfg)
        y_test = _target_vector(test, cfg)
        a_test = test.category_labels(protected_feature).astype(str) if protected_feature else None

        conditions: dict[str, dict] = {}
        size = int(round(cfg.sample_fraction * train.n_rows))

        condition_rows: dict[str, np.ndarray | None] = {FULL_CONDITION: None}
        for name in cfg.samplers:
            s = _draw_sample(cfg, name, train, fm_sample_train, size, derive_seed(cfg.seed, "fold", fold, name))
            sample_provenances.setdefault(name, s.provenance)
            condition_rows[name] = np.asarray(s.indices)

        for condition, rows in condition_rows.items():
            metrics: dict[str, float] = {}
            if rows is None:
                sub = None
                model = _fit(cfg, fm_model_train, y_train)
                metrics["n_train"] = int(train.n_rows)
            else:
                sub = extract(train, SampleIndex(train.source_id, rows, {"sampler_name": condition}))
                fm_sub = encode_matrix(sub, fit_on=train, roles=cfg.model_roles)
                model = _fit(cfg, fm_sub, _target_vector(sub, cfg))
                metrics["n_train"] = int(len(rows))
            preds = model.predict(fm_model_test)
            metrics.update(score(model, fm_model_test, y_test))
            if cfg.protected:
                metrics.update(
                    _fairness_metrics(cfg, preds, y_test, a_test, fold, condition, warnings)
                )

            if sub is not None:
                for feat in cfg.diversity_features or ():
                    try:
                        metrics[f"combinatorial_diversity:{feat}"] = combinatorial_diversity(sub, feat)
                    except DataError as e:
                        warnings.append(f"fold {fold} {condition}: diversity {feat} skipped ({e})")
                gscore = geometric_diversity(
                    fm_sample_train, SampleIndex(train.source_id, rows, {"sampler_name": condition})
                )
                metrics["geometric_diversity_log"] = gscore.geometric_log
                geometric_basis[condition] = gscore.basis
                for feat in cfg.reflection_features or ():
                    da = EmpiricalDistribution1D.from_feature(sub, feat)
                    db = EmpiricalDistribution1D.from_feature(train, feat)
                    metrics[f"emd:{feat}"] = wasserstein1(da, db)
                    metrics[f"ks:{feat}"] = ks_statistic(da, db)
            conditions[condition] = metrics
        fold_results.append(FoldResult(fold, conditions, warnings))

    summary = _summarize(fold_results)
    comparisons = _pairwise_comparisons(cfg, fold_results)
    samples = []
    for name, prov in sorted(sample_provenances.items()):
        entry = {"condition": name, "provenance": prov}
        if name in geometric_basis:
            entry["geometric_basis"] = geometric_basis[name]
        samples.append(entry)
    return CvResult(cfg, fold_results, summary, comparisons, samples)


def _summarize(fold_results) -> list[MetricReport]:
    by_key: dict[tuple, list] = {}
    for fr in fold_results:
        for condition, metrics in fr.conditions.items():
            for metric, value in metrics.items():
                if np.isfinite(value):
                    by_key.setdefault((condition, metric), []).append(float(value))
    reports = []
    for (condition, metric), values in sorted(by_key.items()):
        arr = np.asarray(values)
        reports.append(
            MetricReport(
                metric,
                float(arr.mean()),
                condition=condition,
                sd=float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
                details={"folds": len(arr)},
            )
        )
    return reports


def _pairwise_comparisons(cfg, fold_results) -> list:
    core = [_core_metric(cfg)]
    core += ["rdd", "reod"] if cfg.task == "regression" else ["cdd", "ceod"]
    conditions = list(fold_results[0].conditions)
    rows = []
    for i, a in enumerate(conditions):
        for b in conditions[i + 1 :]:
            for metric in core:
                va = [fr.conditions[a].get(metric) for fr in fold_results]
                vb = [fr.conditions[b].get(metric) for fr in fold_results]
                if any(v is None for v in va + vb):
                    continue
                t = paired_t_test(va, vb)
                rows.append(
                    {"condition_a": a, "condition_b": b, "metric": metric, "t": t["t"], "p": t["p"]}
                )
    if rows:
        adjusted = bh_adjust([r["p"] for r in rows])
        for row, p_adj in zip(rows, adjusted):
            row["p_adj"] = float(p_adj)
    return rows


def state_similarity(train: TabularDataset, state: TabularDataset) -> float:
    """Pearson correlation between the states' encoded feature mean vectors."""
    mu_train = encode_matrix(train).values.mean(axis=0)
    mu_state = encode_matrix(state, fit_on=train).values.mean(axis=0)
    if np.std(mu_train) == 0.0 or np.std(mu_state) == 0.0:
        return float("nan")
    return float(np.corrcoef(mu_train, mu_state)[0, 1])


def run_ood_experiment(train_ds: TabularDataset, other_ds_list, cfg: ExperimentConfig) -> OodResult:
    """Cross-state protocol: per fold, train baseline-sample and coverage-sample
    models on the training state and apply both to every other state.

    Reports per state the mean percentage improvement of the coverage model
    over the baseline ((baseline - coverage) / baseline * 100), its SD, a
    paired t-test over folds, and BH-adjusted significance at alpha=0.05
    across the other states (the in-distribution row keeps its raw p).
    """
    for st in other_ds_list:
        if st.schema != train_ds.schema:
            raise DataError(f"state {st.source_id!r} schema differs from training state")
    core = _core_metric(cfg)
    warnings: list[str] = []
    for st in other_ds_list:
        for f in st.schema:
            if f.is_categorical:
                present = set(np.unique(st.columns[f.name]))
                missing = [c for i, c in enumerate(f.categories) if i not in present]
                if missing:
                    warnings.append(
                        f"state {st.source_id}: feature {f.name} lacks categories {missing}; "
                        "encoded as zero columns"
                    )

    baseline, coverage = cfg.ood_baseline, cfg.ood_coverage
    per_fold_scores: dict[str, dict[str, list]] = {}
    sample_provenances: dict[str, dict] = {}

    for fold, (train_idx, test_idx) in enumerate(fold_splits(train_ds.n_rows, cfg.folds, cfg.seed)):
        train = extract(train_ds, SampleIndex(train_ds.source_id, train_idx, {"sampler_name": "fold"}))
        test = extract(train_ds, SampleIndex(train_ds.source_id, test_idx, {"sampler_name": "fold"}))
        fm_sample_train = encode_matrix(train)
        size = int(round(cfg.sample_fraction * train.n_rows))
        models = {}
        for name in (baseline, coverage):
            s = _draw_sample(cfg, name, train, fm_sample_train, size, derive_seed(cfg.seed, "fold", fold, name))
            sample_provenances.setdefault(name, s.provenance)
            sub = extract(train, s)
            models[name] = _fit(
                cfg, encode_matrix(sub, fit_on=train, roles=cfg.model_roles), _target_vector(sub, cfg)
            )
        eval_sets = [(train_ds.source_id, test)] + [(st.source_id, st) for st in other_ds_list]
        for state_name, state_ds in eval_sets:
            fm_state = encode_matrix(state_ds, fit_on=train, roles=cfg.model_roles)
            y_state = _target_vector(state_ds, cfg)
            entry = per_fold_scores.setdefault(state_name, {baseline: [], coverage: []})
            for name in (baseline, coverage):
                entry[name].append(score(models[name], fm_state, y_state)[core])

    rows = []
    for st in [train_ds] + list(other_ds_list):
        name = st.source_id
        base_scores = np.asarray(per_fold_scores[name][baseline])
        cov_scores = np.asarray(per_fold_scores[name][coverage])
        if core == "mse":
            improvements = (base_scores - cov_scores) / base_scores * 100.0
        else:
            improvements = (cov_scores - base_scores) / base_scores * 100.0
        t = paired_t_test(cov_scores, base_scores)
        rows.append(
            {
                "state": name,
                "in_distribution": name == train_ds.source_id,
                "similarity": 1.0 if name == train_ds.source_id else state_similarity(train_ds, st),
                "mean_improvement_pct": float(improvements.mean()),
                "sd": float(improvements.std(ddof=1)) if len(improvements) > 1 else 0.0,
                "p": t["p"],
            }
        )
    interstate = [r for r in rows if not r["in_distribution"]]
    if interstate:
        adjusted = bh_adjust([r["p"] for r in interstate])
        for row, p_adj in zip(interstate, adjusted):
            row["p_adj"] = float(p_adj)
    for row in rows:
        row.setdefault("p_adj", row["p"])
        row["significant"] = bool(row["p_adj"] < 0.05)
    samples = [
        {"condition": name, "provenance": prov} for name, prov in sorted(sample_provenances.items())
    ]
    return OodResult(cfg, train_ds.source_id, rows, samples, warnings)
