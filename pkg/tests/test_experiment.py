import json

import numpy as np
import pytest

from repsample.errors import ConfigError
from repsample.experiment import (
    ExperimentConfig,
    fold_splits,
    run_cv_experiment,
    run_ood_experiment,
    state_similarity,
)
from repsample.synth import (
    StateShift,
    default_ood_spec,
    default_population_spec,
    generate_synthetic_population,
)


def _small_cfg(**kw):
    base = dict(
        task="regression",
        folds=3,
        sample_fraction=0.25,
        samplers=("stratified", "density"),
        seed=11,
        protected={"feature": "group", "group_major": "1", "group_minor": "9"},
        strata_keys=("group", "flag", "x1"),
        strata_bins={"x1": {"quantiles": 3}},
        protected_as_input=False,
        reflection_features=("group",),
        diversity_features=("group",),
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def small_population():
    return generate_synthetic_population(default_population_spec(n=2400), seed=3)[0]


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(task="ranking")
    with pytest.raises(ConfigError):
        ExperimentConfig(folds=1)
    with pytest.raises(ConfigError):
        ExperimentConfig(sample_fraction=0.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(samplers=("bogus",))
    with pytest.raises(ConfigError):
        ExperimentConfig(protected={"feature": "g"})


def test_config_json_round_trip():
    cfg = _small_cfg()
    restored = ExperimentConfig.from_json(cfg.to_json())
    assert restored == cfg


def test_fold_splits_partition():
    for folds in (2, 5):
        splits = fold_splits(103, folds, seed=4)
        all_test = np.concatenate([t for _, t in splits])
        assert sorted(all_test) == list(range(103))
        for train, test in splits:
            assert len(np.intersect1d(train, test)) == 0
            assert len(train) + len(test) == 103
    a = fold_splits(50, 5, seed=1)
    b = fold_splits(50, 5, seed=1)
    for (ta, sa), (tb, sb) in zip(a, b):
        np.testing.assert_array_equal(ta, tb)
        np.testing.assert_array_equal(sa, sb)


def test_full_fraction_srs_matches_full_model(small_population):
    cfg = _small_cfg(folds=2, sample_fraction=1.0, samplers=("srs",), protected=None,
                     reflection_features=None, diversity_features=None)
    result = run_cv_experiment(small_population, cfg)
    for fr in result.fold_results:
        full_mse = fr.conditions["full_census"]["mse"]
        srs_mse = fr.conditions["srs"]["mse"]
        assert srs_mse == pytest.approx(full_mse, abs=1e-9)  # sample = training set


def test_fairness_columns_present_iff_configured(small_population):
    with_f = run_cv_experiment(small_population, _small_cfg())
    assert "rdd" in with_f.fold_results[0].conditions["stratified"]
    assert "reod" in with_f.fold_results[0].conditions["stratified"]
    without = run_cv_experiment(small_population, _small_cfg(protected=None))
    assert "rdd" not in without.fold_results[0].conditions["stratified"]


def test_miniature_mse_within_two_sd_of_full(small_population):
    cfg = _small_cfg(folds=5, samplers=("stratified",))
    result = run_cv_experiment(small_population, cfg)
    by = {(r.condition, r.metric): r for r in result.summary}
    full = by[("full_census", "mse")]
    mini = by[("stratified", "mse")]
    assert abs(mini.value - full.value) <= 2.0 * max(mini.sd, 1e-12)


def test_cv_deterministic_and_schedule_independent(small_population):
    cfg = _small_cfg()
    a = run_cv_experiment(small_population, cfg)
    b = run_cv_experiment(small_population, cfg)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
    # sampler list order must not change any sampler's own numbers
    flipped = run_cv_experiment(small_population, _small_cfg(samplers=("density", "stratified")))
    for fr_a, fr_f in zip(a.fold_results, flipped.fold_results):
        for cond in ("stratified", "density", "full_census"):
            assert fr_a.conditions[cond] == fr_f.conditions[cond]


def test_cv_classification_metrics(small_population):
    threshold = float(np.median(small_population.columns["y"]))
    cfg = _small_cfg(task="classification", target_threshold=threshold, samplers=("stratified",))
    result = run_cv_experiment(small_population, cfg)
    metrics = result.fold_results[0].conditions["stratified"]
    assert "accuracy" in metrics and "cdd" in metrics and "ceod" in metrics
    assert 0.0 <= metrics["accuracy"] <= 1.0


def test_cv_comparisons_bh_adjusted(small_population):
    result = run_cv_experiment(small_population, _small_cfg())
    assert result.comparisons
    for row in result.comparisons:
        assert row["p_adj"] >= row["p"] - 1e-15
        assert 0.0 <= row["p_adj"] <= 1.0
    pairs = {(r["condition_a"], r["condition_b"]) for r in result.comparisons}
    assert ("full_census", "stratified") in pairs


def test_cv_requires_target():
    from repsample.dataset import FeatureSpec, TabularDataset

    ds = TabularDataset([FeatureSpec("x", "continuous")], {"x": np.arange(40.0)}, "t")
    with pytest.raises(ConfigError):
        run_cv_experiment(ds, _small_cfg(protected=None, strata_keys=("x",),
                                         reflection_features=None, diversity_features=None))


@pytest.fixture(scope="module")
def ood_states():
    spec = default_ood_spec(n=2400, state_n=1200)
    return generate_synthetic_population(spec, seed=5)


def test_ood_in_distribution_row_negative(ood_states):
    base, others = ood_states[0], ood_states[1:]
    cfg = _small_cfg(folds=3)
    result = run_ood_experiment(base, others, cfg)
    rows = {r["state"]: r for r in result.per_state}
    assert rows["base"]["in_distribution"]
    assert rows["base"]["mean_improvement_pct"] < 0  # miniature wins in-distribution
    assert rows["base"]["similarity"] == 1.0


def test_ood_output_shape_and_bh(ood_states):
    base, others = ood_states[0], ood_states[1:]
    result = run_ood_experiment(base, others, _small_cfg(folds=3))
    assert len(result.per_state) == 7
    interstate = [r for r in result.per_state if not r["in_distribution"]]
    for row in interstate:
        assert set(row) >= {"state", "mean_improvement_pct", "sd", "p", "p_adj", "significant"}
        assert row["p_adj"] >= row["p"] - 1e-15
    sims = {r["state"]: r["similarity"] for r in interstate}
    assert sims["similar-1"] > sims["shifted-1"]


def test_ood_per_state_csv(tmp_path, ood_states):
    base, others = ood_states[0], ood_states[1:]
    result = run_ood_experiment(base, others, _small_cfg(folds=2, samplers=("stratified", "density")))
    path = tmp_path / "per_state.csv"
    result.per_state_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("state,in_distribution,similarity,mean_improvement_pct")
    assert len(lines) == 8


def test_ood_schema_mismatch(ood_states):
    from repsample.dataset import FeatureSpec, TabularDataset

    other = TabularDataset([FeatureSpec("z", "continuous")], {"z": [1.0]}, "weird")
    with pytest.raises(Exception):
        run_ood_experiment(ood_states[0], [other], _small_cfg())


def test_ood_missing_category_noted():
    spec = default_population_spec(n=1500, shifts=(
        StateShift("narrow", 600, (0.5, 0.5) + (0.0,) * 7, None),
    ))
    # zero-probability groups are rejected by the spec, so build the shifted
    # state by filtering instead
    spec = default_population_spec(n=1500, shifts=(StateShift("copy", 700, None, None),))
    base, copy = generate_synthetic_population(spec, seed=9)
    from repsample.dataset import SampleIndex, extract

    keep = np.flatnonzero(copy.columns["group"] < 5)
    narrowed = extract(copy, SampleIndex(copy.source_id, keep))
    result = run_ood_experiment(base, [narrowed], _small_cfg(folds=2))
    assert any("lacks categories" in w for w in result.warnings)


def test_state_similarity_bounds(ood_states):
    base = ood_states[0]
    assert state_similarity(base, base) == pytest.approx(1.0)
    for st in ood_states[1:]:
        val = state_similarity(base, st)
        assert -1.0 <= val <= 1.0


def test_report_csv_round_trip(tmp_path, small_population):
    from repsample.report import reports_to_csv

    result = run_cv_experiment(small_population, _small_cfg(folds=2, samplers=("stratified",)))
    path = tmp_path / "summary.csv"
    reports_to_csv(result.summary, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "metric,value,feature,group,condition,sd"
    assert len(lines) == len(result.summary) + 1
