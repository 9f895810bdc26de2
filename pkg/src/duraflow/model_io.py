"""Versioned JSON documents for trained models.

Layout (documented field-by-field in the README so other implementations can
interoperate): a model document carries ``format_version``, ``model_kind``,
the constructor params, the schema fingerprint, per-feature bin edges, and
flat per-tree node arrays. Floats round-trip bit-exactly through json.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .ensembles import GradientBoostedTreeRegressor, RandomForestBinaryClassifier
from .tree import Tree

MODEL_FORMAT_VERSION = 1


def tree_to_doc(tree: Tree) -> dict:
    doc = {
        "feature": tree.feature.tolist(),
        "threshold_bin": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "cover": tree.cover.tolist(),
    }
    if tree.is_classifier:
        doc["class_counts"] = tree.class_counts.tolist()
    else:
        doc["value"] = tree.value.tolist()
    return doc


def tree_from_doc(doc: dict) -> Tree:
    n = len(doc["feature"])
    counts = doc.get("class_counts")
    return Tree(
        feature=np.asarray(doc["feature"], dtype=np.int32),
        threshold=np.asarray(doc["threshold_bin"], dtype=np.int32),
        left=np.asarray(doc["left"], dtype=np.int32),
        right=np.asarray(doc["right"], dtype=np.int32),
        cover=np.asarray(doc["cover"], dtype=np.float64),
        value=np.asarray(doc.get("value", [0.0] * n), dtype=np.float64),
        class_counts=np.asarray(counts, dtype=np.float64) if counts is not None else None,
    )


def _edges_to_doc(bin_edges) -> list:
    return [e.tolist() for e in bin_edges]


def _edges_from_doc(doc) -> list[np.ndarray]:
    return [np.asarray(e, dtype=np.float64) for e in doc]


def forest_to_doc(model: RandomForestBinaryClassifier) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "model_kind": "random_forest",
        "params": model.get_params(),
        "schema_fingerprint": model.schema_fingerprint_,
        "n_features": model.n_features_in_,
        "n_classes": 2,
        "bin_edges": _edges_to_doc(model.bin_edges_),
        "trees": [tree_to_doc(t) for t in model.trees_],
    }


def forest_from_doc(doc: dict) -> RandomForestBinaryClassifier:
    _check_kind(doc, "random_forest")
    model = RandomForestBinaryClassifier(**doc["params"])
    model.trees_ = [tree_from_doc(t) for t in doc["trees"]]
    model.bin_edges_ = _edges_from_doc(doc["bin_edges"])
    model.n_bins_ = np.array([len(e) + 1 for e in model.bin_edges_], dtype=np.int64)
    model.n_features_in_ = doc["n_features"]
    model.mtry_ = model.mtry
    model.classes_ = np.array([0, 1])
    model.schema_fingerprint_ = doc.get("schema_fingerprint")
    return model


def gbdt_to_doc(model: GradientBoostedTreeRegressor) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "model_kind": "gbdt",
        "params": model.get_params(),
        "schema_fingerprint": model.schema_fingerprint_,
        "n_features": model.n_features_in_,
        "base_score": model.base_score_,
        "learning_rate": model.learning_rate,
        "lambda_l2": model.lambda_l2,
        "bin_edges": _edges_to_doc(model.bin_edges_),
        "trees": [tree_to_doc(t) for t in model.trees_],
    }


def gbdt_from_doc(doc: dict) -> GradientBoostedTreeRegressor:
    _check_kind(doc, "gbdt")
    model = GradientBoostedTreeRegressor(**doc["params"])
    model.trees_ = [tree_from_doc(t) for t in doc["trees"]]
    model.base_score_ = doc["base_score"]
    model.bin_edges_ = _edges_from_doc(doc["bin_edges"])
    model.n_bins_ = np.array([len(e) + 1 for e in model.bin_edges_], dtype=np.int64)
    model.n_features_in_ = doc["n_features"]
    model.train_mse_path_ = []
    model.validation_rmse_path_ = []
    model.best_round_ = len(model.trees_)
    model.schema_fingerprint_ = doc.get("schema_fingerprint")
    return model


def _check_kind(doc: dict, expected: str) -> None:
    if doc.get("model_kind") != expected:
        raise ValueError(f"expected a {expected} document, got {doc.get('model_kind')!r}")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {doc.get('format_version')!r}")


def model_to_doc(model) -> dict:
    from .bilevel import BilevelDurationModel, bilevel_to_doc

    if isinstance(model, RandomForestBinaryClassifier):
        return forest_to_doc(model)
    if isinstance(model, GradientBoostedTreeRegressor):
        return gbdt_to_doc(model)
    if isinstance(model, BilevelDurationModel):
        return bilevel_to_doc(model)
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def model_from_doc(doc: dict):
    kind = doc.get("model_kind")
    if kind == "random_forest":
        return forest_from_doc(doc)
    if kind == "gbdt":
        return gbdt_from_doc(doc)
    if kind == "bilevel":
        from .bilevel import bilevel_from_doc

        return bilevel_from_doc(doc)
    raise ValueError(f"unknown model_kind {kind!r}")


def dump_json(path, obj: dict) -> None:
    """Deterministic JSON writer: sorted keys, two-space indent, newline EOF."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_model(path, model) -> None:
    dump_json(path, model_to_doc(model))


def load_model(path):
    with open(Path(path), "r", encoding="utf-8") as fh:
        return model_from_doc(json.load(fh))
