"""Schema-typed tabular data model: CSV ingestion, filtering, transforms, encoding.

Categorical cells are stored as integer codes into ``FeatureSpec.categories``;
continuous cells as float64. Datasets are immutable after construction (the
backing arrays are marked read-only), so concurrent reads are safe.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

KINDS = ("continuous", "binary", "categorical")
ROLES = ("input", "target", "protected", "ignored")
FILTER_OPS = ("gt", "ge", "lt", "le", "eq", "in")

MISSING_TOKEN = ""
MISSING_RULE = "__missing__"


@dataclass(frozen=True)
class FeatureSpec:
    """Declared type and role of one column.

    binary features carry exactly 2 category codes, categorical at least 2;
    continuous features carry none.
    """

    name: str
    kind: str
    categories: tuple[str, ...] | None = None
    role: str = "input"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise ConfigError(f"feature {self.name!r}: unknown role {self.role!r}")
        if self.kind == "continuous":
            if self.categories is not None:
                raise ConfigError(f"feature {self.name!r}: continuous features take no categories")
        else:
            cats = self.categories
            if cats is None or (self.kind == "binary" and len(cats) != 2):
                raise ConfigError(f"feature {self.name!r}: binary features need exactly 2 categories")
            if len(cats) < 2:
                raise ConfigError(f"feature {self.name!r}: categorical features need >= 2 categories")
            if len(set(cats)) != len(cats):
                raise ConfigError(f"feature {self.name!r}: duplicate category codes")

    @property
    def is_categorical(self) -> bool:
        return self.kind in ("binary", "categorical")


def validate_schema(schema: list[FeatureSpec]) -> None:
    names = [f.name for f in schema]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate feature names in schema")
    targets = [f for f in schema if f.role == "target"]
    if len(targets) > 1:
        raise ConfigError(f"schema declares {len(targets)} target features; at most one allowed")


@dataclass(frozen=True)
class FilterRule:
    """Row filter: keep rows where `feature <op> value` holds."""

    feature: str
    op: str
    value: object

    def __post_init__(self):
        if self.op not in FILTER_OPS:
            raise ConfigError(f"filter on {self.feature!r}: unknown op {self.op!r}")

    def label(self) -> str:
        return f"{self.feature} {self.op} {self.value!r}"

    def keeps(self, raw: str, spec: FeatureSpec) -> bool:
        if spec.kind == "continuous":
            x = float(raw)
            if self.op == "gt":
                return x > float(self.value)
            if self.op == "ge":
                return x >= float(self.value)
            if self.op == "lt":
                return x < float(self.value)
            if self.op == "le":
                return x <= float(self.value)
            if self.op == "eq":
                return x == float(self.value)
            return x in [float(v) for v in self.value]
        if self.op == "eq":
            return raw == str(self.value)
        if self.op == "in":
            return raw in [str(v) for v in self.value]
        raise ConfigError(f"filter op {self.op!r} not valid for categorical feature {self.feature!r}")


class TabularDataset:
    """Immutable column-oriented table with a typed schema.

    columns: dict feature name -> array (float64 for continuous, int32 codes
    for binary/categorical). `drop_counts` records rows removed at ingestion,
    keyed by the first failing filter label (or ``__missing__``).
    """

    def __init__(self, schema, columns, source_id="dataset", drop_counts=None):
        validate_schema(schema)
        self.schema = list(schema)
        self.source_id = source_id
        self.drop_counts = dict(drop_counts or {})
        self._by_name = {f.name: f for f in self.schema}
        lengths = {len(columns[f.name]) for f in self.schema}
        if len(lengths) > 1:
            raise DataError(f"column lengths differ: {sorted(lengths)}")
        self.n_rows = lengths.pop() if lengths else 0
        self.columns = {}
        for f in self.schema:
            arr = np.asarray(columns[f.name])
            if f.kind == "continuous":
                arr = arr.astype(np.float64, copy=True)
                if arr.size and not np.all(np.isfinite(arr)):
                    raise DataError(f"feature {f.name!r} contains non-finite values")
            else:
                arr = arr.astype(np.int32, copy=True)
                if arr.size and (arr.min() < 0 or arr.max() >= len(f.categories)):
                    raise DataError(f"feature {f.name!r} has out-of-range category codes")
            arr.setflags(write=False)
            self.columns[f.name] = arr

    def spec(self, name: str) -> FeatureSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise ConfigError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        self.spec(name)
        return self.columns[name]

    def category_labels(self, name: str) -> np.ndarray:
        """Decode a categorical column back to its string codes."""
        spec = self.spec(name)
        if not spec.is_categorical:
            raise ConfigError(f"feature {name!r} is continuous")
        return np.asarray(spec.categories, dtype=object)[self.columns[name]]

    @property
    def target_feature(self) -> FeatureSpec | None:
        for f in self.schema:
            if f.role == "target":
                return f
        return None

    def input_features(self) -> list[FeatureSpec]:
        return [f for f in self.schema if f.role in ("input", "protected")]

    def equals(self, other: "TabularDataset") -> bool:
        if self.schema != other.schema or self.n_rows != other.n_rows:
            return False
        return all(np.array_equal(self.columns[f.name], other.columns[f.name]) for f in self.schema)


@dataclass(frozen=True)
class SampleIndex:
    """Row indices into a parent dataset plus draw provenance."""

    parent_id: str
    indices: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        if len(np.unique(idx)) != len(idx):
            raise DataError("sample indices are not unique")

    def __len__(self) -> int:
        return len(self.indices)

    def to_json(self) -> dict:
        return {
            "parent_id": self.parent_id,
            "indices": [int(i) for i in self.indices],
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SampleIndex":
        return cls(obj["parent_id"], np.asarray(obj["indices"], dtype=np.int64), obj.get("provenance", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path) -> "SampleIndex":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class FeatureMatrix:
    """Encoded n x p real matrix: standardized continuous + one-hot categorical columns.

    Binary features encode to a single 0/1 indicator of their second category
    (drop-first); categorical features to a full one-hot block. Continuous
    columns are z-scored with the population (1/n) std of the fitting data;
    zero-variance columns are kept as all-zero.
    """

    values: np.ndarray
    encoding_map: dict
    column_names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def feature_block(self, name: str) -> np.ndarray:
        lo, hi = self.encoding_map[name]
        return self.values[:, lo:hi]


def _parse_continuous(raw: str, feature: str, row_no: int) -> float:
    try:
        x = float(raw)
    except ValueError:
        raise DataError(f"row {row_no}: feature {feature!r} has non-numeric value {raw!r}") from None
    if not math.isfinite(x):
        raise DataError(f"row {row_no}: feature {feature!r} has non-finite value {raw!r}")
    return x


def ingest_csv(path, schema, filters=(), source_id=None) -> TabularDataset:
    """Read an RFC-4180 CSV with a header row into a TabularDataset.

    Rows with missing cells (empty string) are dropped and counted under
    ``__missing__``; rows failing a filter are dropped and counted under the
    first failing rule. Malformed rows and unknown category codes raise
    DataError naming the 1-based data row.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    validate_schema(schema)
    for rule in filters:
        if rule.feature not in {f.name for f in schema}:
            raise ConfigError(f"filter references unknown feature {rule.feature!r}")

    cat_index = {
        f.name: {c: i for i, c in enumerate(f.categories)} for f in schema if f.is_categorical
    }
    kept: dict[str, list] = {f.name: [] for f in schema}
    drop_counts: dict[str, int] = {}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        pos = {}
        for f in schema:
            if f.name not in header:
                raise DataError(f"{path}: header is missing feature {f.name!r}")
            pos[f.name] = header.index(f.name)

        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(
                    f"row {row_no}: malformed CSV row ({len(row)} fields, expected {len(header)})"
                )
            raw = {name: row[p].strip() for name, p in pos.items()}
            if any(v == MISSING_TOKEN for v in raw.values()):
                drop_counts[MISSING_RULE] = drop_counts.get(MISSING_RULE, 0) + 1
                continue

            parsed = {}
            for f in schema:
                v = raw[f.name]
                if f.kind == "continuous":
                    parsed[f.name] = _parse_continuous(v, f.name, row_no)
                else:
                    try:
                        parsed[f.name] = cat_index[f.name][v]
                    except KeyError:
                        raise DataError(
                            f"row {row_no}: feature {f.name!r} has unknown category code {v!r}"
                        ) from None

            failed = None
            for rule in filters:
                if not rule.keeps(raw[rule.feature], next(f for f in schema if f.name == rule.feature)):
                    failed = rule.label()
                    break
            if failed is not None:
                drop_counts[failed] = drop_counts.get(failed, 0) + 1
                continue
            for name, v in parsed.items():
                kept[name].append(v)

    return TabularDataset(
        schema, kept, source_id=source_id or path.stem, drop_counts=drop_counts
    )


def transform_target_log(ds: TabularDataset) -> TabularDataset:
    """Replace the target column by its natural log. Not idempotent: applying
    twice double-logs. Requires a strictly positive continuous target."""
    target = ds.target_feature
    if target is None or target.kind != "continuous":
        raise ConfigError("log transform requires a continuous target feature")
    y = ds.columns[target.name]
    if y.size and y.min() <= 0:
        raise DataError(
            f"target {target.name!r} has nonpositive values; log transform undefined"
        )
    columns = {f.name: ds.columns[f.name] for f in ds.schema}
    columns[target.name] = np.log(y)
    return TabularDataset(ds.schema, columns, source_id=ds.source_id, drop_counts=ds.drop_counts)


def _encoded_layout(schema, roles):
    """Column layout of the encoded matrix: (name, width, labels) per feature."""
    layout = []
    for f in schema:
        if f.role not in roles:
            continue
        if f.kind == "continuous":
            layout.append((f, 1, [f.name]))
        elif f.kind == "binary":
            layout.append((f, 1, [f"{f.name}={f.categories[1]}"]))
        else:
            layout.append((f, len(f.categories), [f"{f.name}={c}" for c in f.categories]))
    return layout


def encode_matrix(
    ds: TabularDataset,
    standardize: bool = True,
    fit_on: TabularDataset | None = None,
    roles: tuple[str, ...] = ("input", "protected"),
) -> FeatureMatrix:
    """Encode features with the given roles to a real matrix in schema order.

    Continuous features are z-scored with `fit_on` statistics when given
    (population 1/n std); categorical features one-hot in declared category
    order; binary features to one 0/1 column (second category indicator).
    Deterministic: identical inputs give bit-identical matrices. By default
    protected features are encoded alongside inputs; pass roles=("input",) to
    fit models blind to them.
    """
    fit = fit_on if fit_on is not None else ds
    if fit.schema != ds.schema:
        raise ConfigError("fit_on schema differs from dataset schema")

    layout = _encoded_layout(ds.schema, roles)
    p = sum(w for _, w, _ in layout)
    out = np.zeros((ds.n_rows, p))
    means = np.zeros(p)
    stds = np.ones(p)
    encoding_map = {}
    names: list[str] = []
    col = 0
    for f, width, labels in layout:
        encoding_map[f.name] = (col, col + width)
        names.extend(labels)
        values = ds.columns[f.name]
        if f.kind == "continuous":
            if standardize:
                mu = float(fit.columns[f.name].mean()) if fit.n_rows else 0.0
                sd = float(fit.columns[f.name].std()) if fit.n_rows else 0.0  # population (1/n) std
                means[col] = mu
                if sd > 0.0:
                    stds[col] = sd
                    out[:, col] = (values - mu) / sd
                else:
                    out[:, col] = 0.0  # zero-variance column kept as all-zero
            else:
                out[:, col] = values
        elif f.kind == "binary":
            out[:, col] = (values == 1).astype(np.float64)
        else:
            out[np.arange(ds.n_rows), col + values] = 1.0
        col += width
    return FeatureMatrix(out, encoding_map, tuple(names), means, stds)


def extract(ds: TabularDataset, s: SampleIndex) -> TabularDataset:
    """Row-subset dataset preserving schema and row order of `s.indices`."""
    if s.parent_id != ds.source_id:
        raise DataError(f"sample parent {s.parent_id!r} does not match dataset {ds.source_id!r}")
    idx = s.indices
    if idx.size and (idx.min() < 0 or idx.max() >= ds.n_rows):
        raise DataError(f"sample indices out of range for dataset with {ds.n_rows} rows")
    columns = {f.name: ds.columns[f.name][idx] for f in ds.schema}
    return TabularDataset(ds.schema, columns, source_id=ds.source_id)


# -- config loading ------------------------------------------------------


def schema_from_config(obj: dict) -> tuple[list[FeatureSpec], list[FilterRule]]:
    """Parse {features: [...], filters: [...]} config JSON."""
    try:
        feats = obj["features"]
    except KeyError:
        raise ConfigError("config is missing 'features'") from None
    schema = []
    for f in feats:
        try:
            cats = tuple(f["categories"]) if f.get("categories") is not None else None
            schema.append(
                FeatureSpec(f["name"], f["kind"], categories=cats, role=f.get("role", "input"))
            )
        except KeyError as e:
            raise ConfigError(f"feature entry {f!r} is missing key {e}") from None
    filters = [
        FilterRule(r["feature"], r["op"], r["value"]) for r in obj.get("filters", [])
    ]
    validate_schema(schema)
    return schema, filters


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
