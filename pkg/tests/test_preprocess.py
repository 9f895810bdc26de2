import io
from datetime import datetime

import numpy as np
import pytest

from duraflow.exceptions import AllMissingColumn, SchemaMismatch, TooFewRows
from duraflow.ingest import parse_records
from duraflow.preprocess import (
    CategoryMap,
    EncodedDataset,
    FeatureSchema,
    MeanModeImputer,
    PreprocessConfig,
    SplitSpec,
    TabularEncoder,
    compute_duration,
    decode_cell,
    fit_category_map,
    label_duration,
    label_durations,
    modeling_columns,
    prepare_dataset,
    read_encoded_csv,
    split_dataset,
    split_indices,
    trim_outliers,
    write_encoded_csv,
)

from conftest import make_raw_csv
from oracles import quantile_linear


def records_from(rows):
    return parse_records(io.StringIO(make_raw_csv(rows))).records


# --- duration -------------------------------------------------------------

def test_duration_hand_arithmetic():
    assert compute_duration(
        datetime(2019, 6, 1, 8, 0, 0), datetime(2019, 6, 1, 9, 30, 0)
    ) == 90.0


def test_duration_zero_and_negative():
    t = datetime(2019, 6, 1, 8, 0, 0)
    assert compute_duration(t, t) == 0.0
    assert compute_duration(t, datetime(2019, 6, 1, 7, 0, 0)) == -60.0


def test_duration_three_minutes():
    assert compute_duration(
        datetime(2019, 6, 1, 8, 0, 0), datetime(2019, 6, 1, 8, 3, 0)
    ) == 3.0


# --- trimming ---------------------------------------------------------------

def test_trim_1_to_100():
    keep, (lo, hi) = trim_outliers(np.arange(1.0, 101.0))
    assert lo == pytest.approx(5.95, abs=1e-12)
    assert hi == pytest.approx(95.05, abs=1e-12)
    kept = np.arange(1.0, 101.0)[keep]
    assert kept[0] == 6.0 and kept[-1] == 95.0 and len(kept) == 90


def test_trim_matches_quantile_oracle(rng):
    for _ in range(20):
        d = rng.lognormal(4.0, 1.0, int(rng.integers(30, 400)))
        keep, (lo, hi) = trim_outliers(d)
        assert lo == pytest.approx(quantile_linear(d, 0.05), rel=1e-12)
        assert hi == pytest.approx(quantile_linear(d, 0.95), rel=1e-12)
        kept = d[keep]
        assert kept.min() >= lo and kept.max() <= hi
        removed = np.delete(d, keep)
        assert np.all((removed < lo) | (removed > hi))
        assert len(kept) + len(removed) == len(d)


def test_trim_too_few_rows():
    with pytest.raises(TooFewRows):
        trim_outliers(np.arange(10.0))


# --- labeling ---------------------------------------------------------------

def test_label_examples():
    assert label_duration(100.0) == 1
    assert label_duration(164.0) == 0  # strict "less than"
    assert label_duration(360.0) == 0


def test_label_monotone(rng):
    d = np.sort(rng.uniform(1.0, 400.0, 200))
    labels = label_durations(d)
    # once a label drops to 0 it never returns to 1
    assert np.all(np.diff(labels.astype(int)) <= 0)


# --- imputation -------------------------------------------------------------

def test_imputer_fills_numeric_mean():
    recs = records_from([
        {"Temperature(F)": "1.0"}, {"Temperature(F)": "2.0"},
        {"Temperature(F)": ""}, {"Temperature(F)": "3.0"},
    ])
    imputer = MeanModeImputer().fit(recs)
    filled = imputer.transform(recs)
    assert [r.temperature_f for r in filled] == [1.0, 2.0, 2.0, 3.0]


def test_imputer_fills_categorical_mode():
    recs = records_from([
        {"Weather_Condition": "Rain"}, {"Weather_Condition": "Rain"},
        {"Weather_Condition": "Fog"}, {"Weather_Condition": ""},
    ])
    filled = MeanModeImputer().fit(recs).transform(recs)
    assert filled[3].weather_condition == "Rain"


def test_imputer_all_missing_column():
    recs = records_from([{"Temperature(F)": ""}, {"Temperature(F)": ""}])
    with pytest.raises(AllMissingColumn):
        MeanModeImputer().fit(recs)


def test_imputer_idempotent():
    recs = records_from([{"Temperature(F)": ""}, {}, {"Wind_Direction": ""}])
    imputer = MeanModeImputer().fit(records_from([{}, {"Temperature(F)": "60"}]))
    once = imputer.transform(recs)
    twice = imputer.transform(once)
    assert once == twice


def test_imputer_mode_counts_normalized_variants():
    recs = records_from([
        {"Wind_Direction": "CALM"}, {"Wind_Direction": "Calm"},
        {"Wind_Direction": "South"}, {"Wind_Direction": ""},
    ])
    filled = MeanModeImputer().fit(recs).transform(recs)
    # "calm" wins 2-1 on normalized counts; smallest observed spelling is used
    assert filled[3].wind_direction == "CALM"


# --- encoding ---------------------------------------------------------------

def test_category_map_frequency_rank_with_ties():
    cmap = fit_category_map(["b", "a", "b", "c", "a", "d"])
    # a and b tie at 2 (a first lexicographically), then c and d tie at 1
    assert cmap.encode("b") == 2
    assert cmap.encode("a") == 1
    assert cmap.encode("c") == 3
    assert cmap.encode("d") == 4
    assert cmap.encode("zzz") == 0


def test_category_map_normalizes_case():
    cmap = fit_category_map(["CALM", "Calm", "south"])
    assert cmap.encode("calm") == cmap.encode(" CALM ") == 1


def test_encoder_basic_cells():
    recs = records_from([
        {"Junction": "True", "Sunrise_Sunset": "Day", "Weather_Condition": "Rain"},
        {"Junction": "False", "Sunrise_Sunset": "Night", "Weather_Condition": "Fog"},
        {"Weather_Condition": "Rain"},
    ])
    encoder = TabularEncoder().fit(recs)
    X = encoder.transform(recs)
    names = encoder.schema_.feature_names
    j = names.index("Junction")
    s = names.index("Sunrise_Sunset")
    w = names.index("Weather_Condition")
    assert X[0, j] == 1.0 and X[1, j] == 0.0
    assert X[0, s] == 1.0 and X[1, s] == 0.0
    assert X[0, w] == 1.0 and X[1, w] == 2.0  # Rain (2 occurrences) ranks first


def test_encoder_unseen_category_gets_zero():
    train = records_from([{"Weather_Condition": "Rain"}, {"Weather_Condition": "Fog"}])
    encoder = TabularEncoder().fit(train)
    apply = records_from([{"Weather_Condition": "Hail"}])
    X = encoder.transform(apply)
    w = encoder.schema_.feature_names.index("Weather_Condition")
    assert X[0, w] == 0.0


def test_encoder_missing_cell_raises():
    encoder = TabularEncoder().fit(records_from([{}]))
    with pytest.raises(SchemaMismatch):
        encoder.transform(records_from([{"Temperature(F)": ""}]))


def test_encode_decode_roundtrip_known_categories():
    recs = records_from([
        {"Weather_Condition": "Rain", "Wind_Direction": "CALM", "Junction": "True"},
        {"Weather_Condition": "Fog", "Wind_Direction": "South", "Junction": "False"},
        {"Weather_Condition": "Rain", "Wind_Direction": "CALM"},
    ])
    encoder = TabularEncoder().fit(recs)
    X = encoder.transform(recs)
    for i, rec in enumerate(recs):
        for j, col in enumerate(encoder.schema_.columns):
            original = getattr(rec, col.attr)
            decoded = decode_cell(col, X[i, j])
            if col.kind == "numeric":
                assert decoded == original
            elif col.kind == "boolean":
                assert decoded == original
            else:
                assert str(decoded).casefold() == str(original).casefold()


def test_schema_fingerprint_changes_with_schema():
    recs = records_from([{}])
    full = TabularEncoder().fit(recs).schema_
    dropped = TabularEncoder(columns=modeling_columns(drop_turning_loop=True)).fit(recs).schema_
    assert full.n_features == 27
    assert dropped.n_features == 26
    assert full.fingerprint() != dropped.fingerprint()
    assert full.fingerprint() == FeatureSchema.from_dict(full.to_dict()).fingerprint()


# --- splitting --------------------------------------------------------------

def test_split_75_25():
    train, test = split_indices(100, SplitSpec(seed=3))
    assert len(train) == 75 and len(test) == 25


def test_split_same_seed_identical():
    a = split_indices(97, SplitSpec(seed=11))
    b = split_indices(97, SplitSpec(seed=11))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_split_disjoint_cover(rng):
    for n in (1, 2, 17, 100):
        train, test = split_indices(n, SplitSpec(seed=int(rng.integers(1e6))))
        merged = np.sort(np.concatenate([train, test]))
        assert np.array_equal(merged, np.arange(n))
        assert len(np.intersect1d(train, test)) == 0


def test_split_stratified_four_rows():
    labels = np.array([1, 1, 0, 0])
    train, test = split_indices(4, SplitSpec(train_fraction=0.5, seed=0, stratified=True),
                                labels)
    assert sorted(labels[train].tolist()) == [0, 1]
    assert sorted(labels[test].tolist()) == [0, 1]


def test_split_stratified_preserves_proportions(rng):
    labels = (rng.random(200) < 0.3).astype(int)
    train, test = split_indices(200, SplitSpec(seed=5, stratified=True), labels)
    for cls in (0, 1):
        total = int((labels == cls).sum())
        got = int((labels[train] == cls).sum())
        assert abs(got - 0.75 * total) <= 1


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=1.0)


def test_split_dataset_matches_indices():
    schema = TabularEncoder().fit(records_from([{}])).schema_
    n = 40
    ds = EncodedDataset(
        X=np.arange(n * schema.n_features, dtype=np.float64).reshape(n, -1),
        durations=np.arange(n, dtype=np.float64) + 1,
        labels=np.zeros(n, dtype=np.int8),
        schema=schema,
    )
    train, test = split_dataset(ds, SplitSpec(seed=2))
    idx_train, idx_test = split_indices(n, SplitSpec(seed=2))
    assert np.array_equal(train.X, ds.X[idx_train])
    assert np.array_equal(test.durations, ds.durations[idx_test])


# --- end-to-end preparation -------------------------------------------------

def _synthetic_records(n=120):
    rows = []
    for i in range(n):
        minutes = 60 if i % 2 else 300
        hour, minute = divmod(8 * 60 + minutes, 60)
        rows.append({
            "End_Time": f"2019-06-01 {hour:02d}:{minute:02d}:00",
            "Temperature(F)": "" if i % 17 == 0 else f"{50 + (i % 40)}.0",
            "Weather_Condition": ["Clear", "Rain", "Fog"][i % 3],
            "Junction": "True" if i % 2 == 0 else "False",
        })
    return records_from(rows)


def test_prepare_dataset_end_to_end():
    recs = _synthetic_records()
    prepared = prepare_dataset(recs, PreprocessConfig(split=SplitSpec(seed=1)))
    assert prepared.train.n_rows + prepared.test.n_rows == prepared.stats["rows_retained"]
    assert prepared.schema.n_features == 27
    assert not np.isnan(prepared.train.X).any()
    # labels consistent with threshold
    for part in (prepared.train, prepared.test):
        assert np.array_equal(part.labels, (part.durations < prepared.threshold).astype(int))


def test_prepare_threshold_auto_uses_trimmed_mean():
    recs = _synthetic_records()
    prepared = prepare_dataset(
        recs, PreprocessConfig(threshold_mode="auto", split=SplitSpec(seed=1))
    )
    all_durations = np.concatenate([prepared.train.durations, prepared.test.durations])
    assert prepared.threshold == pytest.approx(all_durations.mean())


def test_encoded_csv_roundtrip(tmp_path):
    recs = _synthetic_records(60)
    prepared = prepare_dataset(recs, PreprocessConfig(split=SplitSpec(seed=4)))
    path = tmp_path / "train.csv"
    write_encoded_csv(path, prepared.train)
    back = read_encoded_csv(path, prepared.schema)
    assert np.array_equal(back.X, prepared.train.X)
    assert np.array_equal(back.durations, prepared.train.durations)
    assert np.array_equal(back.labels, prepared.train.labels)


def test_load_encoded_rejects_inconsistent_labels(tmp_path):
    import json

    from duraflow.preprocess import dataset_sidecar, load_encoded

    recs = _synthetic_records(60)
    config = PreprocessConfig(split=SplitSpec(seed=4))
    prepared = prepare_dataset(recs, config)
    sidecar_path = tmp_path / "dataset.json"
    sidecar_path.write_text(json.dumps(dataset_sidecar(prepared, config)), encoding="utf-8")
    csv_path = tmp_path / "train.csv"
    corrupted = EncodedDataset(
        X=prepared.train.X,
        durations=prepared.train.durations,
        labels=1 - prepared.train.labels,
        schema=prepared.schema,
    )
    write_encoded_csv(csv_path, corrupted)
    with pytest.raises(SchemaMismatch):
        load_encoded(sidecar_path, csv_path)


def test_category_map_display_roundtrip():
    cmap = fit_category_map(["Rain", "Rain", "Fog"])
    rebuilt = CategoryMap.from_display_list(cmap.categories)
    assert rebuilt == cmap
