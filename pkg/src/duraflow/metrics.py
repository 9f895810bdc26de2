"""Regression and classification metrics used throughout the toolkit.

Two absolute-error style metrics are emitted side by side on purpose:
``mae`` is the mean absolute error in minutes, while ``relative_error``
is the dimensionless mean of |actual - predicted| / actual. Reports carry
both so neither convention is silently dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyInput, ZeroActual


def _as_pair(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.size == 0:
        raise EmptyInput("metric requires at least one (actual, predicted) pair")
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} actual vs {p.shape[0]} predicted")
    return a, p


def rmse(actual, predicted) -> float:
    """Root mean square error: sqrt(sum((actual - predicted)^2) / n)."""
    a, p = _as_pair(actual, predicted)
    return float(np.sqrt(np.mean((a - p) ** 2)))


def mae(actual, predicted) -> float:
    """Mean absolute error in the units of the inputs (minutes here)."""
    a, p = _as_pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def relative_error(actual, predicted) -> float:
    """Mean of |actual - predicted| / actual; requires every actual to be nonzero."""
    a, p = _as_pair(actual, predicted)
    if np.any(a == 0.0):
        raise ZeroActual("relative error undefined: an actual value is zero")
    return float(np.mean(np.abs(a - p) / a))


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 confusion counts with class 1 (short duration) as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class ClassWiseMetrics:
    precision: float
    recall: float
    f1: float
    support: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
        }


@dataclass(frozen=True)
class ClassificationReport:
    """Accuracy plus per-class and aggregated precision/recall/F1.

    The headline row mirrored from evaluation tables is the support-weighted
    aggregate; the macro aggregate is kept alongside it.
    """

    accuracy: float
    per_class: dict = field(default_factory=dict)  # label -> ClassWiseMetrics
    macro: ClassWiseMetrics | None = None
    weighted: ClassWiseMetrics | None = None
    confusion: ConfusionMatrix | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": {str(k): v.to_dict() for k, v in sorted(self.per_class.items())},
            "macro": self.macro.to_dict() if self.macro else None,
            "weighted": self.weighted.to_dict() if self.weighted else None,
            "confusion": self.confusion.to_dict() if self.confusion else None,
        }

    def to_text(self) -> str:
        """Aligned-column plain-text table, one row per class plus aggregates."""
        rows = [("", "precision", "recall", "f1-score", "support")]
        for label in sorted(self.per_class):
            m = self.per_class[label]
            rows.append((str(label), f"{m.precision:.4f}", f"{m.recall:.4f}",
                         f"{m.f1:.4f}", str(m.support)))
        rows.append(("accuracy", "", "", f"{self.accuracy:.4f}", str(self.confusion.total)))
        for name, m in (("macro avg", self.macro), ("weighted avg", self.weighted)):
            rows.append((name, f"{m.precision:.4f}", f"{m.recall:.4f}",
                         f"{m.f1:.4f}", str(m.support)))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        return "\n".join(
            "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows
        )


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return precision, recall, f1


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    """Count tp/fp/tn/fn over binary {0, 1} labels, class 1 positive."""
    t = np.asarray(y_true).ravel().astype(np.int64)
    p = np.asarray(y_pred).ravel().astype(np.int64)
    if t.size == 0:
        raise EmptyInput("confusion matrix requires at least one label")
    if t.shape != p.shape:
        raise ValueError("label arrays differ in length")
    bad = set(np.unique(np.concatenate([t, p]))) - {0, 1}
    if bad:
        raise ValueError(f"labels must be 0 or 1, got extras {sorted(bad)}")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def classification_report(y_true, y_pred) -> ClassificationReport:
    """Accuracy, per-class precision/recall/F1, and macro/weighted aggregates."""
    cm = confusion_matrix(y_true, y_pred)
    n = cm.total
    accuracy = (cm.tp + cm.tn) / n

    # class 1 uses the counts as-is; class 0 swaps the positive/negative roles
    p1, r1, f1_1 = _prf(cm.tp, cm.fp, cm.fn)
    p0, r0, f1_0 = _prf(cm.tn, cm.fn, cm.fp)
    support1 = cm.tp + cm.fn
    support0 = cm.tn + cm.fp
    per_class = {
        0: ClassWiseMetrics(p0, r0, f1_0, support0),
        1: ClassWiseMetrics(p1, r1, f1_1, support1),
    }
    macro = ClassWiseMetrics(
        (p0 + p1) / 2, (r0 + r1) / 2, (f1_0 + f1_1) / 2, n
    )
    weighted = ClassWiseMetrics(
        (p0 * support0 + p1 * support1) / n,
        (r0 * support0 + r1 * support1) / n,
        (f1_0 * support0 + f1_1 * support1) / n,
        n,
    )
    return ClassificationReport(
        accuracy=accuracy,
        per_class=per_class,
        macro=macro,
        weighted=weighted,
        confusion=cm,
    )


def regression_summary(actual, predicted) -> dict:
    """rmse / mae / relative error bundle used by evaluation reports."""
    return {
        "n": int(np.asarray(actual).size),
        "rmse": rmse(actual, predicted),
        "mae": mae(actual, predicted),
        "relative_error": relative_error(actual, predicted),
    }
