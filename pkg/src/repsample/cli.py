"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .coverage import coverage_report
from .dataset import (
    SampleIndex,
    encode_matrix,
    extract,
    ingest_csv,
    load_config,
    schema_from_config,
    transform_target_log,
)
from .datasheet import write_datasheet
from .errors import ConfigError, DataError
from .experiment import ExperimentConfig, run_cv_experiment, run_ood_experiment
from .fairness import PredictionTriple, cdd, ceod, make_fair_dummies, rdd, reod_detail
from .reflection import reflection_report
from .report import MetricReport, reports_to_json
from .representatives import compute_representatives
from .sampling import (
    build_strata,
    build_dpp_kernel,
    compute_density_weights,
    sample_density,
    sample_kdpp,
    sample_kdpp_repeated,
    sample_simple_random,
    sample_stratified,
)
from .synth import SyntheticPopulationSpec, default_ood_spec, default_population_spec, generate_synthetic_population, write_state_csvs


def _load_dataset(data_path, config_path):
    cfg = load_config(config_path)
    schema, filters = schema_from_config(cfg)
    ds = ingest_csv(data_path, schema, filters)
    if cfg.get("log_target"):
        ds = transform_target_log(ds)
    return ds, cfg


def _fairness_pairing(cfg: dict):
    fair = cfg.get("fairness", {})
    return (
        fair.get("protected_feature", "RAC1P"),
        str(fair.get("group_major", "1")),
        str(fair.get("group_minor", "5")),
    )


def _cmd_sample(args) -> int:
    ds, cfg = _load_dataset(args.data, args.config)
    if args.size is not None:
        size = args.size
    elif args.frac is not None:
        size = int(round(args.frac * ds.n_rows))
    else:
        raise ConfigError("one of --size or --frac is required")
    sampling_cfg = cfg.get("sampling", {})
    if args.method == "srs":
        s = sample_simple_random(ds, size, args.seed)
    elif args.method == "stratified":
        strata_cfg = sampling_cfg.get("strata", {})
        keys = strata_cfg.get("keys")
        if not keys:
            keys = [f.name for f in ds.schema if f.is_categorical and f.role in ("input", "protected")]
        bins = {k: np.asarray(v, dtype=np.float64) for k, v in strata_cfg.get("bins", {}).items()}
        s = sample_stratified(ds, build_strata(ds, keys, bins), size, args.seed)
    elif args.method == "density":
        dens_cfg = sampling_cfg.get("density", {})
        fm = encode_matrix(ds)
        weights = compute_density_weights(fm, dens_cfg.get("k", 5), dens_cfg.get("temperature", 1.0))
        s = sample_density(ds, weights, size, args.seed)
    else:
        fm = encode_matrix(ds)
        kernel = build_dpp_kernel(fm)
        if size <= kernel.effective_rank:
            s = sample_kdpp(ds, kernel, size, args.seed)
        else:
            s = sample_kdpp_repeated(ds, fm, size, args.seed)
    s.save(args.out)
    print(f"wrote {len(s)} indices to {args.out}")
    return 0


def _cmd_evaluate_reflection(args) -> int:
    ds, cfg = _load_dataset(args.data, args.config)
    s = SampleIndex.load(args.sample)
    sample_ds = extract(ds, s)
    features = args.features.split(",") if args.features else [
        f.name for f in ds.schema if f.role in ("input", "protected")
    ]
    reports = reflection_report(sample_ds, ds, features)
    for r in reports:
        r.provenance = s.provenance
    reports_to_json(reports, args.out)
    print(f"wrote {len(reports)} metric records to {args.out}")
    return 0


def _cmd_evaluate_coverage(args) -> int:
    ds, cfg = _load_dataset(args.data, args.config)
    samples = [SampleIndex.load(p) for p in args.samples]
    fm = encode_matrix(ds)
    features = args.features.split(",") if args.features else [
        f.name for f in ds.schema if f.is_categorical and f.role in ("input", "protected")
    ]
    reports = coverage_report(ds, samples, fm, features, force=args.force)
    reports_to_json(reports, args.out)
    print(f"wrote {len(reports)} metric records to {args.out}")
    return 0


def _cmd_evaluate_representatives(args) -> int:
    ds, cfg = _load_dataset(args.data, args.config)
    group_by = args.group_by.split(",")
    bins_cfg = cfg.get("sampling", {}).get("strata", {}).get("bins", {})
    bins = {k: np.asarray(v, dtype=np.float64) for k, v in bins_cfg.items()}
    reps = compute_representatives(ds, group_by, encode_matrix(ds), center=args.center, bins=bins)
    Path(args.out).write_text(
        json.dumps([r.to_json() for r in reps], sort_keys=True, indent=1) + "\n"
    )
    print(f"wrote {len(reps)} group representatives to {args.out}")
    return 0


def _read_predictions(path) -> PredictionTriple:
    import csv as _csv

    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    y_hat, y, a = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        required = {"y_hat", "y", "a"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(f"{path}: predictions CSV needs columns y_hat, y, a")
        for i, row in enumerate(reader, start=1):
            try:
                y_hat.append(float(row["y_hat"]))
                y.append(float(row["y"]))
            except ValueError:
                raise DataError(f"row {i}: non-numeric prediction or target") from None
            a.append(row["a"])
    return PredictionTriple(np.asarray(y_hat), np.asarray(y), np.asarray(a, dtype=object))


def _cmd_evaluate_fairness(args) -> int:
    cfg = load_config(args.config)
    feature, g0, g1 = _fairness_pairing(cfg)
    fair_cfg = cfg.get("fairness", {})
    pt = _read_predictions(args.pred)
    binary = bool(np.isin(pt.y_hat, (0.0, 1.0)).all() and np.isin(pt.y, (0.0, 1.0)).all())
    task = fair_cfg.get("task", "classification" if binary else "regression")
    reports = []
    if task == "classification":
        reports.append(MetricReport("cdd", cdd(pt, g0, g1), group=f"{g0}/{g1}"))
        reports.append(MetricReport("ceod", ceod(pt, g0, g1), group=f"{g0}/{g1}"))
    else:
        reports.append(MetricReport("rdd", rdd(pt, g0, g1), group=f"{g0}/{g1}"))
        fd = make_fair_dummies(pt, n_bins=fair_cfg.get("bins", 10), seed=args.seed)
        detail = reod_detail(pt, fd, g0, g1, n_resamples=fair_cfg.get("resamples", 10))
        reports.append(
            MetricReport(
                "reod", detail["value"], group=f"{g0}/{g1}",
                details={"cell_coverage": detail["cell_coverage"]},
            )
        )
    reports_to_json(reports, args.out)
    print(f"wrote {len(reports)} metric records to {args.out}")
    return 0


def _experiment_data(exp: dict, need_states: bool):
    data = exp.get("data", {})
    if "synthetic" in data:
        spec_obj = data["synthetic"]
        if spec_obj == "default":
            spec = default_population_spec()
        elif spec_obj == "default-ood":
            spec = default_ood_spec()
        else:
            spec = SyntheticPopulationSpec.from_json(spec_obj)
        states = generate_synthetic_population(spec, data.get("generator_seed", exp.get("seed", 0)))
        if need_states and len(states) < 2:
            raise ConfigError("ood experiment needs a synthetic spec with shift states")
        return states[0], states[1:]
    if "csv_dir" in data:
        cfg = load_config(data["config"])
        schema, filters = schema_from_config(cfg)
        csv_dir = Path(data["csv_dir"])
        train_name = data.get("train_state")
        if train_name is None:
            raise ConfigError("data.csv_dir needs data.train_state")
        states = []
        for path in sorted(csv_dir.glob("*.csv")):
            ds = ingest_csv(path, schema, filters)
            if cfg.get("log_target") or data.get("log_target"):
                ds = transform_target_log(ds)
            states.append(ds)
        by_name = {ds.source_id: ds for ds in states}
        if train_name not in by_name:
            raise DataError(f"train state {train_name!r} not found in {csv_dir}")
        train = by_name.pop(train_name)
        return train, [by_name[k] for k in sorted(by_name)]
    if "csv" in data:
        ds, _ = _load_dataset(data["csv"], data["config"])
        return ds, []
    raise ConfigError("experiment config needs data.synthetic, data.csv, or data.csv_dir")


def _cmd_experiment(args) -> int:
    exp = load_config(args.config)
    cfg = ExperimentConfig.from_json(exp)
    out_dir = Path(exp.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.mode == "cv":
        train, _ = _experiment_data(exp, need_states=False)
        result = run_cv_experiment(train, cfg)
        result.save(out_dir / "summary.json")
        print(f"wrote {out_dir / 'summary.json'}")
    else:
        train, others = _experiment_data(exp, need_states=True)
        if not others:
            raise ConfigError("ood experiment needs at least one other state")
        result = run_ood_experiment(train, others, cfg)
        result.save(out_dir / "summary.json")
        result.per_state_csv(out_dir / "per_state.csv")
        print(f"wrote {out_dir / 'summary.json'} and {out_dir / 'per_state.csv'}")
    return 0


def _cmd_synth(args) -> int:
    if args.spec == "default":
        spec = default_population_spec()
    elif args.spec == "default-ood":
        spec = default_ood_spec()
    else:
        spec = SyntheticPopulationSpec.from_json(load_config(args.spec))
    states = generate_synthetic_population(spec, args.seed)
    paths = write_state_csvs(states, args.out)
    print(f"wrote {len(paths)} files to {args.out}")
    return 0


def _cmd_datasheet(args) -> int:
    if not Path(args.run).exists():
        raise DataError(f"no such run file: {args.run}")
    write_datasheet(args.run, args.out, purpose=args.purpose)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repsample",
        description="Draw samples from tabular populations and audit their representativity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a sample and write its index JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--method", required=True, choices=["srs", "stratified", "density", "kdpp"])
    p.add_argument("--size", type=int)
    p.add_argument("--frac", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    ev = sub.add_parser("evaluate", help="compute representativity or fairness metrics")
    ev_sub = ev.add_subparsers(dest="evaluate_command", required=True)

    p = ev_sub.add_parser("reflection", help="distributional distances sample vs population")
    p.add_argument("--sample", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--features")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate_reflection)

    p = ev_sub.add_parser("coverage", help="combinatorial and geometric diversity of samples")
    p.add_argument("--samples", nargs="+", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--features")
    p.add_argument("--force", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate_coverage)

    p = ev_sub.add_parser("representatives", help="group centers, medoids, dispersion")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--group-by", required=True)
    p.add_argument("--center", choices=["mean", "median"], default="mean")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate_representatives)

    p = ev_sub.add_parser("fairness", help="disparity metrics over predictions CSV")
    p.add_argument("--pred", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate_fairness)

    p = sub.add_parser("experiment", help="run the cv or ood protocol from a config")
    p.add_argument("mode", choices=["cv", "ood"])
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("synth", help="generate synthetic state CSVs from a spec")
    p.add_argument("--spec", required=True, help="spec JSON path, 'default', or 'default-ood'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("datasheet", help="emit a datasheet for a completed run")
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--purpose")
    p.set_defaults(func=_cmd_datasheet)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
