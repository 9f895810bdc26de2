"""The headline pipeline: classify short vs long, then route to a branch
regressor trained only on its regime.

Branch regressors are trained on TRUE labels; inference routes every row by
the PREDICTED label, so a misclassified row is priced by the wrong branch.
The classifier slot accepts any estimator with fit/predict/predict_proba,
which lets tests inject oracle or constant stubs.
"""
from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted

from . import model_io
from .ensembles import GradientBoostedTreeRegressor, RandomForestBinaryClassifier
from .exceptions import EmptyBranch, SchemaMismatch, SingleClassTraining
from .metrics import classification_report, regression_summary
from .preprocess import DEFAULT_THRESHOLD_MINUTES, label_durations

SHORT, LONG = 1, 0


class ConstantClassifier(BaseEstimator, ClassifierMixin):
    """Stub that predicts one label for every row; for property tests."""

    def __init__(self, label: int = LONG):
        self.label = label

    def fit(self, X, y=None, **kwargs):
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X, **kwargs) -> np.ndarray:
        return np.full(len(X), self.label, dtype=np.int64)

    def predict_proba(self, X, **kwargs) -> np.ndarray:
        proba = np.zeros((len(X), 2))
        proba[:, self.label] = 1.0
        return proba


class FixedLabelClassifier(BaseEstimator, ClassifierMixin):
    """Stub that replays a fixed label sequence aligned with the predict rows.

    Passing the true labels of an evaluation set makes this an oracle router.
    """

    def __init__(self, labels: Sequence[int] = ()):
        self.labels = labels

    def fit(self, X, y=None, **kwargs):
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X, **kwargs) -> np.ndarray:
        labels = np.asarray(self.labels, dtype=np.int64)
        if len(labels) != len(X):
            raise ValueError(
                f"fixed labels ({len(labels)}) do not align with rows ({len(X)})"
            )
        return labels

    def predict_proba(self, X, **kwargs) -> np.ndarray:
        labels = self.predict(X)
        proba = np.zeros((len(labels), 2))
        proba[np.arange(len(labels)), labels] = 1.0
        return proba


class BilevelDurationModel(BaseEstimator):
    """Classifier + two branch regressors behind one predict surface."""

    def __init__(
        self,
        threshold: float = DEFAULT_THRESHOLD_MINUTES,
        threshold_mode: str = "fixed",
        classifier=None,
        short_regressor=None,
        long_regressor=None,
    ):
        self.threshold = threshold
        self.threshold_mode = threshold_mode
        self.classifier = classifier
        self.short_regressor = short_regressor
        self.long_regressor = long_regressor

    def fit(self, X, durations, schema_fingerprint: str | None = None):
        X = check_array(X, dtype=np.float64)
        durations = np.asarray(durations, dtype=np.float64).ravel()
        if len(durations) != len(X):
            raise ValueError("X and durations length mismatch")

        threshold = (
            float(np.mean(durations)) if self.threshold_mode == "auto" else self.threshold
        )
        labels = label_durations(durations, threshold).astype(np.int64)
        if len(np.unique(labels)) < 2:
            raise SingleClassTraining(
                "training durations fall entirely on one side of the threshold"
            )
        short_mask = labels == SHORT
        for name, count in (("short", short_mask.sum()), ("long", (~short_mask).sum())):
            if count < 2:
                raise EmptyBranch(f"{name} branch has {count} training rows; need >= 2")

        classifier = clone(self.classifier) if self.classifier is not None \
            else RandomForestBinaryClassifier()
        short_reg = clone(self.short_regressor) if self.short_regressor is not None \
            else GradientBoostedTreeRegressor()
        long_reg = clone(self.long_regressor) if self.long_regressor is not None \
            else GradientBoostedTreeRegressor()

        fit_kwargs = {"schema_fingerprint": schema_fingerprint} if schema_fingerprint else {}
        self.classifier_ = classifier.fit(X, labels, **fit_kwargs)
        self.short_regressor_ = short_reg.fit(X[short_mask], durations[short_mask], **fit_kwargs)
        self.long_regressor_ = long_reg.fit(X[~short_mask], durations[~short_mask], **fit_kwargs)
        self.threshold_ = threshold
        self.schema_fingerprint_ = schema_fingerprint
        self.n_features_in_ = X.shape[1]
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(X).tobytes())
        digest.update(np.ascontiguousarray(durations).tobytes())
        self.provenance_ = {
            "training_rows": int(len(X)),
            "training_data_sha256": digest.hexdigest(),
            "threshold": threshold,
            "seeds": {
                "classifier": getattr(self.classifier_, "random_state", None),
                "short_regressor": getattr(self.short_regressor_, "random_state", None),
                "long_regressor": getattr(self.long_regressor_, "random_state", None),
            },
        }
        return self

    def _check_X(self, X) -> np.ndarray:
        check_is_fitted(self, "classifier_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatch(
                f"model expects {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X

    def predict_detail(self, X) -> dict:
        """Minutes, routed branch label, and classifier probabilities per row."""
        X = self._check_X(X)
        proba = self.classifier_.predict_proba(X)
        branch = self.classifier_.predict(X)
        minutes = np.empty(len(X), dtype=np.float64)
        short_rows = branch == SHORT
        if short_rows.any():
            minutes[short_rows] = self.short_regressor_.predict(X[short_rows])
        if (~short_rows).any():
            minutes[~short_rows] = self.long_regressor_.predict(X[~short_rows])
        return {"minutes": minutes, "branch": branch, "proba": proba}

    def predict(self, X) -> np.ndarray:
        return self.predict_detail(X)["minutes"]


def evaluate_bilevel(model: BilevelDurationModel, X, durations) -> dict:
    """Score the routed pipeline on a test split.

    Combined metrics cover every row against true durations; per-branch
    metrics are reported both over the rows routed to the branch and over the
    correctly routed subset; misroute_rate is 1 - classification accuracy.
    """
    X = np.asarray(X, dtype=np.float64)
    durations = np.asarray(durations, dtype=np.float64).ravel()
    if len(durations) == 0:
        raise ValueError("evaluation requires a non-empty test split")
    detail = model.predict_detail(X)
    true_labels = label_durations(durations, model.threshold_).astype(np.int64)
    report = classification_report(true_labels, detail["branch"])

    branches = {}
    for label, name in ((SHORT, "short"), (LONG, "long")):
        routed = detail["branch"] == label
        correct = routed & (true_labels == label)
        branches[name] = {
            "routed": _branch_metrics(durations, detail["minutes"], routed),
            "correctly_routed": _branch_metrics(durations, detail["minutes"], correct),
        }

    # each regressor scored directly on its true-regime rows, independent of
    # the classifier (the standalone per-branch view)
    branch_models = {}
    for label, name, sub in (
        (SHORT, "short", model.short_regressor_),
        (LONG, "long", model.long_regressor_),
    ):
        mask = true_labels == label
        branch_models[name] = (
            regression_summary(durations[mask], sub.predict(X[mask]))
            if mask.any() else None
        )

    return {
        "n_rows": int(len(durations)),
        "threshold_minutes": model.threshold_,
        "combined": regression_summary(durations, detail["minutes"]),
        "classification": report.to_dict(),
        "misroute_rate": 1.0 - report.accuracy,
        "branches": branches,
        "branch_models": branch_models,
    }


def _branch_metrics(durations, minutes, mask) -> dict | None:
    if not mask.any():
        return None
    summary = regression_summary(durations[mask], minutes[mask])
    return summary


def prediction_rows(durations, detail: dict) -> list[tuple]:
    """(index, actual, predicted, branch) rows in evaluation order."""
    return [
        (i, float(durations[i]), float(detail["minutes"][i]), int(detail["branch"][i]))
        for i in range(len(durations))
    ]


def bilevel_to_doc(model: BilevelDurationModel) -> dict:
    check_is_fitted(model, "classifier_")
    return {
        "format_version": model_io.MODEL_FORMAT_VERSION,
        "model_kind": "bilevel",
        "threshold_minutes": model.threshold_,
        "threshold_mode": model.threshold_mode,
        "schema_fingerprint": model.schema_fingerprint_,
        "n_features": model.n_features_in_,
        "classifier": model_io.model_to_doc(model.classifier_),
        "short_regressor": model_io.model_to_doc(model.short_regressor_),
        "long_regressor": model_io.model_to_doc(model.long_regressor_),
        "provenance": model.provenance_,
    }


def bilevel_from_doc(doc: dict) -> BilevelDurationModel:
    if doc.get("model_kind") != "bilevel":
        raise ValueError(f"expected a bilevel document, got {doc.get('model_kind')!r}")
    model = BilevelDurationModel(
        threshold=doc["threshold_minutes"], threshold_mode=doc.get("threshold_mode", "fixed")
    )
    model.classifier_ = model_io.model_from_doc(doc["classifier"])
    model.short_regressor_ = model_io.model_from_doc(doc["short_regressor"])
    model.long_regressor_ = model_io.model_from_doc(doc["long_regressor"])
    model.threshold_ = doc["threshold_minutes"]
    model.schema_fingerprint_ = doc.get("schema_fingerprint")
    model.n_features_in_ = doc["n_features"]
    model.provenance_ = doc.get("provenance", {})
    return model
