"""Exact path-dependent SHAP attribution for both tree-ensemble families.

Attributions explain the classifier's probability of class 1 (short) and the
booster's additive score before the zero clip; per-feature values plus the
base value reproduce the model output exactly (local accuracy).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._shap_kernel import tree_shap_batch
from ._svg import bar_chart_svg
from .ensembles import (
    GradientBoostedTreeRegressor,
    RandomForestBinaryClassifier,
    _bin_with_edges,
    _check_predict_input,
)
from .exceptions import MissingCovers
from .tree import Tree


@dataclass(frozen=True)
class ShapVector:
    """Per-feature attribution for one row; sums with base_value to the output."""

    values: np.ndarray
    base_value: float
    feature_names: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ShapSummary:
    """Mean |attribution| per feature over a dataset with a descending ranking."""

    feature_names: tuple[str, ...]
    mean_abs: np.ndarray
    order: np.ndarray  # feature indices, most influential first

    def ranked(self) -> list[tuple[str, float]]:
        return [(self.feature_names[i], float(self.mean_abs[i])) for i in self.order]


def _leaf_scalar_values(tree: Tree) -> np.ndarray:
    """Scalar output per leaf: class-1 probability for classifier trees."""
    if not tree.is_classifier:
        return tree.value
    totals = tree.class_counts.sum(axis=1)
    values = np.zeros(tree.n_nodes, dtype=np.float64)
    leaves = tree.feature < 0
    values[leaves] = tree.class_counts[leaves, 1] / totals[leaves]
    return values


def _check_covers(tree: Tree) -> None:
    if tree.cover is None or len(tree.cover) != tree.n_nodes or np.any(tree.cover <= 0):
        raise MissingCovers(
            "tree node sample counts are required for path-dependent attribution"
        )


def _tree_expected_value(tree: Tree, values: np.ndarray) -> float:
    leaves = tree.feature < 0
    return float(np.sum(values[leaves] * tree.cover[leaves]) / tree.cover[0])


def _model_parts(model) -> tuple[list[Tree], float, float]:
    """(trees, per-tree output scale, output offset) for a fitted ensemble."""
    if isinstance(model, RandomForestBinaryClassifier):
        return model.trees_, 1.0 / len(model.trees_), 0.0
    if isinstance(model, GradientBoostedTreeRegressor):
        return model.trees_, model.learning_rate, model.base_score_
    raise TypeError(f"cannot explain model of type {type(model).__name__}")


def shap_values(model, X) -> tuple[np.ndarray, float]:
    """Attribution matrix (n_rows, n_features) and the shared base value."""
    trees, scale, offset = _model_parts(model)
    X = _check_predict_input(model, X)
    Xb = _bin_with_edges(X, model.bin_edges_).astype(np.int64)
    phi = np.zeros((len(X), model.n_features_in_), dtype=np.float64)
    base = offset
    for tree in trees:
        _check_covers(tree)
        values = _leaf_scalar_values(tree)
        tree_shap_batch(
            tree.left.astype(np.int64),
            tree.right.astype(np.int64),
            tree.feature.astype(np.int64),
            tree.threshold.astype(np.int64),
            tree.cover,
            values,
            Xb,
            phi,
        )
        base += scale * _tree_expected_value(tree, values)
    # phi accumulated unscaled per tree; the combination rule is uniform
    return phi * scale, float(base)


def shap_for_row(model, x, feature_names=None) -> ShapVector:
    phi, base = shap_values(model, np.asarray(x, dtype=np.float64).reshape(1, -1))
    return ShapVector(
        values=phi[0],
        base_value=base,
        feature_names=tuple(feature_names) if feature_names else None,
    )


def shap_summary(
    model, X, feature_names=None, sample_cap: int = 10_000, random_state: int = 0
) -> ShapSummary:
    """Mean |attribution| over (a deterministic subsample of) a dataset."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("summary requires a non-empty dataset")
    if sample_cap is not None and len(X) > sample_cap:
        rng = np.random.default_rng(random_state)
        X = X[np.sort(rng.choice(len(X), size=sample_cap, replace=False))]
    phi, _ = shap_values(model, X)
    mean_abs = np.mean(np.abs(phi), axis=0)
    # stable ranking: descending magnitude, then feature order
    order = np.lexsort((np.arange(len(mean_abs)), -mean_abs))
    names = (
        tuple(feature_names)
        if feature_names
        else tuple(f"f{j}" for j in range(phi.shape[1]))
    )
    return ShapSummary(feature_names=names, mean_abs=mean_abs, order=order)


def write_shap_row_csv(path, vector: ShapVector) -> None:
    names = vector.feature_names or tuple(f"f{j}" for j in range(len(vector.values)))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "phi"])
        for name, value in zip(names, vector.values):
            writer.writerow([name, repr(float(value))])
        writer.writerow(["<base_value>", repr(vector.base_value)])


def write_shap_summary_csv(path, summary: ShapSummary) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "mean_abs_shap", "rank"])
        for rank, idx in enumerate(summary.order, start=1):
            writer.writerow(
                [summary.feature_names[idx], repr(float(summary.mean_abs[idx])), rank]
            )


def write_shap_summary_svg(path, summary: ShapSummary, title: str) -> None:
    pairs = summary.ranked()
    bar_chart_svg(
        path,
        labels=[name for name, _ in pairs],
        values=[value for _, value in pairs],
        title=title,
        x_label="mean |attribution|",
    )
