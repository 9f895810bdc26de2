import numpy as np
import pytest

from duraflow.ensembles import GradientBoostedTreeRegressor, RandomForestBinaryClassifier
from duraflow.exceptions import MissingCovers
from duraflow.explain import (
    shap_for_row,
    shap_summary,
    shap_values,
    write_shap_row_csv,
    write_shap_summary_csv,
    write_shap_summary_svg,
)
from duraflow.tree import GrowParams, grow_tree
from duraflow._shap_kernel import tree_shap_batch

from oracles import brute_force_shap


def run_kernel(tree, Xb):
    phi = np.zeros((len(Xb), Xb.shape[1]), dtype=np.float64)
    tree_shap_batch(
        tree.left.astype(np.int64), tree.right.astype(np.int64),
        tree.feature.astype(np.int64), tree.threshold.astype(np.int64),
        tree.cover, tree.value, np.asarray(Xb, dtype=np.int64), phi,
    )
    return phi


def test_single_leaf_tree_gives_zero_phi(rng):
    X = np.zeros((10, 3))
    y = np.full(10, 42.0)
    model = GradientBoostedTreeRegressor(
        n_rounds=1, learning_rate=1.0, early_stopping_rounds=None
    ).fit(X, y)
    phi, base = shap_values(model, X[:4])
    assert np.allclose(phi, 0.0)
    assert base == pytest.approx(42.0)


def test_depth_one_tree_single_feature_attribution():
    X = np.repeat(np.array([[0.0], [1.0]]), 8, axis=0)
    y = np.where(X[:, 0] > 0.5, 100.0, 20.0)
    model = GradientBoostedTreeRegressor(
        n_rounds=1, learning_rate=1.0, lambda_l2=0.0, min_samples_leaf=1,
        early_stopping_rounds=None,
    ).fit(X, y)
    phi, base = shap_values(model, X)
    raw = model._raw_predict(X)
    assert np.allclose(phi[:, 0], raw - base, atol=1e-12)


def test_kernel_matches_exhaustive_shapley(rng):
    for _ in range(30):
        n = int(rng.integers(10, 50))
        Xb = rng.integers(0, 5, size=(n, 4)).astype(np.int32)
        y = rng.normal(size=n)
        tree = grow_tree(
            Xb, np.full(4, 5),
            GrowParams(impurity="sq_loss", max_leaves=int(rng.integers(2, 9)),
                       min_samples_leaf=1),
            grad=-y,
        )
        row = rng.integers(0, 5, size=4).astype(np.int64)
        phi = run_kernel(tree, row.reshape(1, -1))[0]
        ref = brute_force_shap(tree, row, 4)
        assert np.allclose(phi, ref, atol=1e-9)


def test_local_accuracy_both_model_kinds(rng):
    n = 600
    X = rng.normal(size=(n, 6))
    y_reg = 40 + 12 * X[:, 0] - 6 * X[:, 1] * X[:, 2] + rng.normal(size=n)
    gbdt = GradientBoostedTreeRegressor(
        n_rounds=25, early_stopping_rounds=None, random_state=1
    ).fit(X, y_reg)
    phi, base = shap_values(gbdt, X[:200])
    raw = gbdt._raw_predict(X[:200])
    assert np.allclose(phi.sum(axis=1) + base, raw, rtol=1e-6, atol=1e-9)

    y_cls = (X[:, 0] + X[:, 1] > 0).astype(int)
    forest = RandomForestBinaryClassifier(n_trees=10, random_state=2).fit(X, y_cls)
    phi_f, base_f = shap_values(forest, X[:200])
    proba = forest.predict_proba(X[:200])[:, 1]
    assert np.allclose(phi_f.sum(axis=1) + base_f, proba, rtol=1e-6, atol=1e-9)


def test_unused_feature_has_exactly_zero_phi(rng):
    n = 200
    X = rng.normal(size=(n, 4))
    y = 10 * (X[:, 1] > 0)  # only feature 1 matters
    model = GradientBoostedTreeRegressor(
        n_rounds=5, learning_rate=1.0, early_stopping_rounds=None
    ).fit(X, y)
    used = set()
    for tree in model.trees_:
        used |= {int(f) for f in tree.feature if f >= 0}
    phi, _ = shap_values(model, X[:50])
    for j in range(4):
        if j not in used:
            assert np.all(phi[:, j] == 0.0)


def test_additivity_over_boosted_trees(rng):
    n = 150
    X = rng.normal(size=(n, 3))
    y = 30 + 5 * X[:, 0] + rng.normal(size=n)
    model = GradientBoostedTreeRegressor(
        n_rounds=8, early_stopping_rounds=None, random_state=3
    ).fit(X, y)
    rows = X[:20]
    phi, _ = shap_values(model, rows)
    from duraflow.ensembles import _bin_with_edges

    Xb = _bin_with_edges(rows, model.bin_edges_).astype(np.int64)
    total = np.zeros_like(phi)
    for tree in model.trees_:
        total += model.learning_rate * run_kernel(tree, Xb)
    assert np.allclose(phi, total, atol=1e-12)


def test_summary_constant_model_all_zero():
    X = np.zeros((30, 3))
    y = np.full(30, 7.0)
    model = GradientBoostedTreeRegressor(
        n_rounds=2, early_stopping_rounds=None
    ).fit(X, y)
    summary = shap_summary(model, X)
    assert np.allclose(summary.mean_abs, 0.0)
    assert sorted(summary.order.tolist()) == [0, 1, 2]


def test_summary_single_feature_model(rng):
    n = 200
    X = rng.normal(size=(n, 5))
    y = np.where(X[:, 2] > 0, 90.0, 30.0)
    model = GradientBoostedTreeRegressor(
        n_rounds=3, learning_rate=1.0, early_stopping_rounds=None
    ).fit(X, y)
    summary = shap_summary(model, X)
    assert summary.order[0] == 2
    nonzero = summary.mean_abs > 0
    assert nonzero[2] and nonzero.sum() == 1


def test_summary_sample_cap_deterministic(rng):
    X = rng.normal(size=(500, 4))
    y = 20 + 4 * X[:, 0]
    model = GradientBoostedTreeRegressor(
        n_rounds=5, early_stopping_rounds=None
    ).fit(X, y)
    a = shap_summary(model, X, sample_cap=100, random_state=9)
    b = shap_summary(model, X, sample_cap=100, random_state=9)
    assert np.array_equal(a.mean_abs, b.mean_abs)


def test_missing_covers_raises(rng):
    X = rng.normal(size=(50, 3))
    y = 5 * X[:, 0]
    model = GradientBoostedTreeRegressor(
        n_rounds=2, early_stopping_rounds=None
    ).fit(X, y)
    model.trees_[0].cover = np.zeros_like(model.trees_[0].cover)
    with pytest.raises(MissingCovers):
        shap_values(model, X[:2])


def test_row_and_summary_writers(tmp_path, rng):
    X = rng.normal(size=(60, 3))
    y = 10 + 3 * X[:, 1]
    model = GradientBoostedTreeRegressor(
        n_rounds=4, early_stopping_rounds=None
    ).fit(X, y)
    names = ["alpha", "beta", "gamma"]
    vector = shap_for_row(model, X[0], feature_names=names)
    assert vector.values.sum() + vector.base_value == pytest.approx(
        model._raw_predict(X[:1])[0], rel=1e-9
    )
    row_path = tmp_path / "row.csv"
    write_shap_row_csv(row_path, vector)
    assert row_path.read_text().startswith("feature,phi")

    summary = shap_summary(model, X, feature_names=names)
    csv_path = tmp_path / "summary.csv"
    svg_path = tmp_path / "summary.svg"
    write_shap_summary_csv(csv_path, summary)
    write_shap_summary_svg(svg_path, summary, "demo")
    body = csv_path.read_text()
    assert body.splitlines()[0] == "feature,mean_abs_shap,rank"
    assert "beta" in body
    assert svg_path.read_text().startswith("<svg")
