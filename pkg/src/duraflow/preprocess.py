"""Duration computation, outlier trimming, labeling, imputation, encoding, split.

The fitted artifacts (imputation stats, category code maps, schema) are
immutable after ``fit`` and serializable to a JSON sidecar; the sidecar plus
a plain CSV of encoded values is the contract consumed by training,
evaluation, and reporting.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import AllMissingColumn, SchemaMismatch, TooFewRows
from .ingest import MODELING_COLUMNS, RawAccidentRecord

DEFAULT_THRESHOLD_MINUTES = 164.0
SIDECAR_FORMAT_VERSION = 1


def compute_duration(start: datetime, end: datetime) -> float:
    """Minutes between start and end; negative when end precedes start."""
    return (end - start).total_seconds() / 60.0


def durations_from_records(records: Sequence[RawAccidentRecord]) -> np.ndarray:
    return np.array(
        [compute_duration(r.start_time, r.end_time) for r in records], dtype=np.float64
    )


def trim_outliers(
    durations, lower_q: float = 0.05, upper_q: float = 0.95
) -> tuple[np.ndarray, tuple[float, float]]:
    """Indices of rows inside the [lower_q, upper_q] empirical quantile band.

    Quantiles interpolate linearly between order statistics (position
    1 + (n-1)q). Callers drop non-positive durations before trimming.
    """
    d = np.asarray(durations, dtype=np.float64)
    if d.ndim != 1:
        raise ValueError("durations must be one-dimensional")
    if not np.all(np.isfinite(d)):
        raise ValueError("durations must be finite")
    if d.size < 20:
        raise TooFewRows(f"trimming needs at least 20 rows, got {d.size}")
    lower_cut, upper_cut = np.quantile(d, [lower_q, upper_q])
    keep = np.nonzero((d >= lower_cut) & (d <= upper_cut))[0]
    return keep, (float(lower_cut), float(upper_cut))


def label_duration(duration: float, threshold: float = DEFAULT_THRESHOLD_MINUTES) -> int:
    """1 for a short incident (strictly below threshold), 0 for a long one."""
    return 1 if duration < threshold else 0


def label_durations(durations, threshold: float = DEFAULT_THRESHOLD_MINUTES) -> np.ndarray:
    return (np.asarray(durations, dtype=np.float64) < threshold).astype(np.int8)


def normalize_category(text: str) -> str:
    return text.strip().casefold()


@dataclass(frozen=True)
class CategoryMap:
    """Category text -> dense integer code, fitted by descending frequency.

    Code 0 is reserved for values unseen during fitting; known categories get
    codes 1..k. Lookups normalize case and surrounding whitespace, so "CALM"
    and "Calm" share a code.
    """

    categories: tuple[str, ...]  # display text, index i holds code i + 1
    codes: dict[str, int] = field(repr=False)  # normalized key -> code

    @classmethod
    def from_display_list(cls, categories: Sequence[str]) -> "CategoryMap":
        codes = {normalize_category(c): i + 1 for i, c in enumerate(categories)}
        return cls(categories=tuple(categories), codes=codes)

    def encode(self, text: str) -> int:
        return self.codes.get(normalize_category(text), 0)

    def decode(self, code: int) -> str:
        if code == 0:
            return "<unknown>"
        return self.categories[code - 1]

    @property
    def n_known(self) -> int:
        return len(self.categories)


def fit_category_map(values: Iterable[str]) -> CategoryMap:
    """Rank normalized categories by descending count, ties lexicographic."""
    counts: dict[str, int] = {}
    display: dict[str, str] = {}
    for text in values:
        key = normalize_category(text)
        counts[key] = counts.get(key, 0) + 1
        prior = display.get(key)
        if prior is None or text < prior:
            display[key] = text
    ordered = sorted(counts, key=lambda k: (-counts[k], k))
    return CategoryMap.from_display_list([display[k] for k in ordered])


@dataclass(frozen=True)
class ColumnSpec:
    name: str  # CSV header name
    attr: str  # RawAccidentRecord attribute
    kind: str  # numeric | boolean | daynight | categorical
    categories: CategoryMap | None = None


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered modeling columns plus fitted encoders; the unit of model/data
    compatibility via its fingerprint."""

    columns: tuple[ColumnSpec, ...]
    target_name: str = "duration_minutes"
    label_name: str = "short_label"

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            entry: dict = {"name": c.name, "kind": c.kind}
            if c.categories is not None:
                entry["categories"] = list(c.categories.categories)
            cols.append(entry)
        return {"columns": cols, "target": self.target_name, "label": self.label_name}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSchema":
        attr_by_name = {name: attr for name, attr, _ in MODELING_COLUMNS}
        columns = []
        for entry in data["columns"]:
            cmap = None
            if "categories" in entry:
                cmap = CategoryMap.from_display_list(entry["categories"])
            columns.append(
                ColumnSpec(
                    name=entry["name"],
                    attr=attr_by_name.get(entry["name"], entry["name"]),
                    kind=entry["kind"],
                    categories=cmap,
                )
            )
        return cls(
            columns=tuple(columns),
            target_name=data.get("target", "duration_minutes"),
            label_name=data.get("label", "short_label"),
        )

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(payload.encode("utf-8")).hexdigest()


def modeling_columns(
    drop_turning_loop: bool = False, drop_distance: bool = False
) -> tuple[tuple[str, str, str], ...]:
    """The feature column list, optionally without Turning_Loop / Distance(mi)."""
    cols = MODELING_COLUMNS
    if drop_turning_loop:
        cols = tuple(c for c in cols if c[0] != "Turning_Loop")
    if drop_distance:
        cols = tuple(c for c in cols if c[0] != "Distance(mi)")
    return cols


class MeanModeImputer(BaseEstimator, TransformerMixin):
    """Fill absent cells with the training mean (numeric) or mode (others).

    Mode counting normalizes category text; the fill value is the
    lexicographically smallest observed spelling of the winning category, so
    repeated fits on the same data are byte-stable.
    """

    def __init__(self, columns: tuple[tuple[str, str, str], ...] | None = None):
        self.columns = columns

    def fit(self, X: Sequence[RawAccidentRecord], y=None):
        cols = self.columns if self.columns is not None else MODELING_COLUMNS
        means: dict[str, float] = {}
        modes: dict[str, object] = {}
        for name, attr, kind in cols:
            observed = [getattr(r, attr) for r in X if getattr(r, attr) is not None]
            if not observed:
                raise AllMissingColumn(f"column {name} has no observed training value")
            if kind == "numeric":
                means[attr] = float(np.mean(np.asarray(observed, dtype=np.float64)))
            elif kind == "boolean":
                trues = sum(1 for v in observed if v)
                modes[attr] = trues > len(observed) - trues  # tie -> False
            else:
                counts: dict[str, int] = {}
                display: dict[str, str] = {}
                for text in observed:
                    key = normalize_category(text)
                    counts[key] = counts.get(key, 0) + 1
                    prior = display.get(key)
                    if prior is None or text < prior:
                        display[key] = text
                best = min(counts, key=lambda k: (-counts[k], k))
                modes[attr] = display[best]
        self.means_ = means
        self.modes_ = modes
        self.columns_ = cols
        return self

    def transform(self, X: Sequence[RawAccidentRecord]) -> list[RawAccidentRecord]:
        filled = []
        for rec in X:
            updates = {}
            for name, attr, kind in self.columns_:
                if getattr(rec, attr) is None:
                    updates[attr] = (
                        self.means_[attr] if kind == "numeric" else self.modes_[attr]
                    )
            filled.append(dataclasses.replace(rec, **updates) if updates else rec)
        return filled

    def to_dict(self) -> dict:
        name_by_attr = {attr: name for name, attr, _ in self.columns_}
        return {
            "means": {name_by_attr[a]: v for a, v in self.means_.items()},
            "modes": {name_by_attr[a]: v for a, v in self.modes_.items()},
        }


class TabularEncoder(BaseEstimator, TransformerMixin):
    """Encode imputed records into the numeric feature matrix.

    Booleans map to {0, 1}, Day/Night to {1, 0}, categoricals to fitted
    frequency-rank codes (0 for unseen), numerics pass through unchanged.
    """

    def __init__(self, columns: tuple[tuple[str, str, str], ...] | None = None):
        self.columns = columns

    def fit(self, X: Sequence[RawAccidentRecord], y=None):
        cols = self.columns if self.columns is not None else MODELING_COLUMNS
        specs = []
        for name, attr, kind in cols:
            cmap = None
            if kind == "categorical":
                observed = [getattr(r, attr) for r in X if getattr(r, attr) is not None]
                cmap = fit_category_map(observed)
            specs.append(ColumnSpec(name=name, attr=attr, kind=kind, categories=cmap))
        self.schema_ = FeatureSchema(columns=tuple(specs))
        return self

    def transform(self, X: Sequence[RawAccidentRecord]) -> np.ndarray:
        schema = self.schema_
        out = np.empty((len(X), schema.n_features), dtype=np.float64)
        for i, rec in enumerate(X):
            for j, col in enumerate(schema.columns):
                value = getattr(rec, col.attr)
                if value is None:
                    raise SchemaMismatch(
                        f"row {i}: column {col.name} is absent; impute before encoding"
                    )
                out[i, j] = encode_cell(col, value)
        return out


def encode_cell(col: ColumnSpec, value) -> float:
    if col.kind == "numeric":
        return float(value)
    if col.kind == "boolean":
        return 1.0 if value else 0.0
    if col.kind == "daynight":
        key = normalize_category(str(value))
        if key == "day":
            return 1.0
        if key == "night":
            return 0.0
        raise ValueError(f"column {col.name}: expected Day or Night, got {value!r}")
    if col.kind == "categorical":
        return float(col.categories.encode(str(value)))
    raise AssertionError(f"unhandled kind {col.kind}")


def decode_cell(col: ColumnSpec, code: float):
    """Inverse of encode_cell for non-numeric kinds (numerics are identity)."""
    if col.kind == "numeric":
        return code
    if col.kind == "boolean":
        return bool(code)
    if col.kind == "daynight":
        return "Day" if code == 1.0 else "Night"
    return col.categories.decode(int(code))


@dataclass
class EncodedDataset:
    """Feature matrix plus per-row duration target and short/long label."""

    X: np.ndarray
    durations: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        if not (len(self.X) == len(self.durations) == len(self.labels)):
            raise ValueError("X, durations, and labels must have equal lengths")

    @property
    def n_rows(self) -> int:
        return len(self.X)

    def take(self, idx: np.ndarray) -> "EncodedDataset":
        return EncodedDataset(
            X=self.X[idx], durations=self.durations[idx],
            labels=self.labels[idx], schema=self.schema,
        )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def split_indices(
    n: int, spec: SplitSpec, labels: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint, covering (train, test) index arrays, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        if labels is None:
            raise ValueError("stratified split requires labels")
        labels = np.asarray(labels)
        train_parts = []
        for cls in np.unique(labels):
            cls_idx = np.nonzero(labels == cls)[0]
            perm = rng.permutation(cls_idx)
            k = int(round(spec.train_fraction * len(cls_idx)))
            train_parts.append(perm[:k])
        train = np.sort(np.concatenate(train_parts))
    else:
        perm = rng.permutation(n)
        k = int(round(spec.train_fraction * n))
        train = np.sort(perm[:k])
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    test = np.nonzero(mask)[0]
    return train, test


def split_dataset(
    ds: EncodedDataset, spec: SplitSpec
) -> tuple[EncodedDataset, EncodedDataset]:
    if ds.n_rows == 0:
        raise ValueError("cannot split an empty dataset")
    labels = ds.labels if spec.stratified else None
    train_idx, test_idx = split_indices(ds.n_rows, spec, labels)
    return ds.take(train_idx), ds.take(test_idx)


@dataclass(frozen=True)
class PreprocessConfig:
    threshold: float = DEFAULT_THRESHOLD_MINUTES
    threshold_mode: str = "fixed"  # fixed | auto; auto = mean of trimmed durations
    lower_q: float = 0.05
    upper_q: float = 0.95
    fit_on: str = "train"  # train | all; "all" imputes/encodes before the split
    drop_turning_loop: bool = False
    drop_distance: bool = False
    split: SplitSpec = field(default_factory=SplitSpec)

    def __post_init__(self):
        if self.threshold_mode not in ("fixed", "auto"):
            raise ValueError("threshold_mode must be 'fixed' or 'auto'")
        if self.fit_on not in ("train", "all"):
            raise ValueError("fit_on must be 'train' or 'all'")


@dataclass
class PreparedData:
    train: EncodedDataset
    test: EncodedDataset
    imputer: MeanModeImputer
    threshold: float
    trim_cuts: tuple[float, float]
    stats: dict

    @property
    def schema(self) -> FeatureSchema:
        return self.train.schema


def prepare_dataset(
    records: Sequence[RawAccidentRecord], config: PreprocessConfig | None = None
) -> PreparedData:
    """Run the full preprocessing chain over filtered records.

    Drops non-positive durations, trims the outer 5% tails, labels against
    the threshold, splits, fits the imputer and encoder (on the training
    side unless config.fit_on == "all"), and encodes every retained row.
    """
    config = config or PreprocessConfig()
    durations_all = durations_from_records(records)
    positive = np.nonzero(durations_all > 0.0)[0]
    rows = [records[i] for i in positive]
    durations = durations_all[positive]

    keep, cuts = trim_outliers(durations, config.lower_q, config.upper_q)
    rows = [rows[i] for i in keep]
    durations = durations[keep]

    threshold = (
        float(np.mean(durations)) if config.threshold_mode == "auto" else config.threshold
    )
    labels = label_durations(durations, threshold)

    train_idx, test_idx = split_indices(
        len(rows), config.split, labels if config.split.stratified else None
    )
    fit_rows = rows if config.fit_on == "all" else [rows[i] for i in train_idx]

    cols = modeling_columns(config.drop_turning_loop, config.drop_distance)
    imputer = MeanModeImputer(columns=cols).fit(fit_rows)
    imputed = imputer.transform(rows)
    encoder = TabularEncoder(columns=cols).fit(
        imputer.transform(fit_rows) if config.fit_on == "train" else imputed
    )
    X = encoder.transform(imputed)

    ds = EncodedDataset(X=X, durations=durations, labels=labels, schema=encoder.schema_)
    stats = {
        "rows_in": len(records),
        "rows_nonpositive_duration": int(len(records) - positive.size),
        "rows_trimmed": int(positive.size - keep.size),
        "rows_retained": ds.n_rows,
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
    }
    return PreparedData(
        train=ds.take(train_idx),
        test=ds.take(test_idx),
        imputer=imputer,
        threshold=threshold,
        trim_cuts=cuts,
        stats=stats,
    )


# ---------------------------------------------------------------------------
# Dataset serialization: JSON sidecar + plain CSV of encoded values.
# ---------------------------------------------------------------------------

def dataset_sidecar(prepared: PreparedData, config: PreprocessConfig) -> dict:
    schema = prepared.schema
    return {
        "format_version": SIDECAR_FORMAT_VERSION,
        "kind": "duraflow.dataset",
        "schema": schema.to_dict(),
        "schema_fingerprint": schema.fingerprint(),
        "imputation": prepared.imputer.to_dict(),
        "threshold_minutes": prepared.threshold,
        "threshold_mode": config.threshold_mode,
        "trim": {
            "lower_q": config.lower_q,
            "upper_q": config.upper_q,
            "lower_cut": prepared.trim_cuts[0],
            "upper_cut": prepared.trim_cuts[1],
        },
        "split": {
            "train_fraction": config.split.train_fraction,
            "seed": config.split.seed,
            "stratified": config.split.stratified,
        },
        "fit_on": config.fit_on,
        "stats": prepared.stats,
    }


def write_encoded_csv(path, ds: EncodedDataset) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            list(ds.schema.feature_names) + [ds.schema.target_name, ds.schema.label_name]
        )
        for i in range(ds.n_rows):
            row = [repr(float(v)) for v in ds.X[i]]
            row.append(repr(float(ds.durations[i])))
            row.append(str(int(ds.labels[i])))
            writer.writerow(row)


def read_encoded_csv(path, schema: FeatureSchema) -> EncodedDataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = list(schema.feature_names) + [schema.target_name, schema.label_name]
        if header != expected:
            raise SchemaMismatch(
                f"encoded CSV header does not match the sidecar schema: {header[:3]}..."
            )
        X_rows, durations, labels = [], [], []
        for row in reader:
            if not row:
                continue
            X_rows.append([float(v) for v in row[: schema.n_features]])
            durations.append(float(row[schema.n_features]))
            labels.append(int(row[schema.n_features + 1]))
    return EncodedDataset(
        X=np.asarray(X_rows, dtype=np.float64).reshape(len(X_rows), schema.n_features),
        durations=np.asarray(durations, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int8),
        schema=schema,
    )


def save_prepared(workdir, prepared: PreparedData, config: PreprocessConfig) -> dict:
    """Write dataset.json + train.csv + test.csv under workdir; returns paths."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    sidecar_path = workdir / "dataset.json"
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(dataset_sidecar(prepared, config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    train_path = workdir / "train.csv"
    test_path = workdir / "test.csv"
    write_encoded_csv(train_path, prepared.train)
    write_encoded_csv(test_path, prepared.test)
    return {
        "sidecar": str(sidecar_path),
        "train": str(train_path),
        "test": str(test_path),
    }


def load_sidecar(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("kind") != "duraflow.dataset":
        raise ValueError(f"{path} is not a duraflow dataset sidecar")
    return data


def load_encoded(sidecar_path, csv_path) -> tuple[EncodedDataset, dict]:
    sidecar = load_sidecar(sidecar_path)
    schema = FeatureSchema.from_dict(sidecar["schema"])
    ds = read_encoded_csv(csv_path, schema)
    threshold = sidecar.get("threshold_minutes")
    if threshold is not None and ds.n_rows:
        expected = label_durations(ds.durations, threshold)
        if not np.array_equal(expected, ds.labels):
            raise SchemaMismatch(
                f"{csv_path}: labels disagree with the sidecar threshold "
                f"({threshold} minutes)"
            )
    return ds, sidecar
