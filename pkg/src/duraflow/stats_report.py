"""Descriptive statistics and plot-data exports for the report bundle.

Quantiles everywhere use linear interpolation between order statistics
(position 1 + (n-1)q); standard deviations are population (1/n).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._svg import boxplot_svg, heatmap_svg
from .exceptions import EmptyInput


@dataclass(frozen=True)
class SummaryStats:
    count: int
    maximum: float
    minimum: float
    mean: float
    std: float  # population

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "max": self.maximum,
            "min": self.minimum,
            "mean": self.mean,
            "std": self.std,
        }


@dataclass(frozen=True)
class FiveNumber:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def to_dict(self) -> dict:
        return {
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
        }


def summary_stats(values) -> SummaryStats:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("summary statistics require at least one value")
    if not np.all(np.isfinite(v)):
        raise ValueError("summary statistics require finite values")
    return SummaryStats(
        count=int(v.size),
        maximum=float(v.max()),
        minimum=float(v.min()),
        mean=float(v.mean()),
        std=float(v.std()),
    )


def five_number(values) -> FiveNumber:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("five-number summary requires at least one value")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return FiveNumber(
        minimum=float(v.min()), q1=float(q1), median=float(med),
        q3=float(q3), maximum=float(v.max()),
    )


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # symmetric, |r| <= 1
    constant: np.ndarray  # bool flags: column had zero variance

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "values": [[float(v) for v in row] for row in self.values],
            "constant_columns": [self.labels[i] for i in np.nonzero(self.constant)[0]],
        }


def correlation_matrix(columns: np.ndarray, labels) -> CorrelationMatrix:
    """Pairwise Pearson r over the given column matrix (n_rows, n_cols).

    Any pair involving a zero-variance column scores 0 and the column is
    flagged; the diagonal is 1 for non-constant columns.
    """
    X = np.asarray(columns, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("correlation requires a 2-D matrix with >= 2 rows")
    centered = X - X.mean(axis=0)
    std = X.std(axis=0)
    constant = std == 0.0
    safe_std = np.where(constant, 1.0, std)
    Z = centered / safe_std
    r = (Z.T @ Z) / X.shape[0]
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    keep = ~constant
    r[np.ix_(keep, keep)] = np.clip(r[np.ix_(keep, keep)], -1.0, 1.0)
    np.fill_diagonal(r, np.where(constant, 0.0, 1.0))
    return CorrelationMatrix(labels=tuple(labels), values=r, constant=constant)


def prediction_series(actual, predicted, first_n: int = 100) -> list[tuple[int, float, float]]:
    """(index, actual, predicted) for the first first_n evaluation rows."""
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.size == 0:
        raise EmptyInput("prediction series requires at least one pair")
    if a.shape != p.shape:
        raise ValueError("actual/predicted length mismatch")
    n = min(a.size, first_n)
    return [(i, float(a[i]), float(p[i])) for i in range(n)]


def histogram_table(values, bins: int = 64) -> list[tuple[float, float, int]]:
    """(bin_left, bin_right, count) rows over equal-width bins."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("histogram requires at least one value")
    counts, edges = np.histogram(v, bins=bins)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(len(counts))
    ]


def category_counts(values) -> list[tuple[str, int]]:
    """(category, count) sorted by descending count then name."""
    counts: dict[str, int] = {}
    for v in values:
        key = str(v)
        counts[key] = counts.get(key, 0) + 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


# ---------------------------------------------------------------------------
# File writers: report/<name>.csv (+ .svg for the chart-shaped outputs)
# ---------------------------------------------------------------------------

def _csv_out(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_summary_csv(path, name: str, stats: SummaryStats) -> None:
    _csv_out(
        path,
        ["series", "count", "max", "min", "mean", "std"],
        [[name, stats.count, repr(stats.maximum), repr(stats.minimum),
          repr(stats.mean), repr(stats.std)]],
    )


def write_boxplot(csv_path, svg_path, fn: FiveNumber, title: str) -> None:
    _csv_out(
        csv_path,
        ["min", "q1", "median", "q3", "max"],
        [[repr(fn.minimum), repr(fn.q1), repr(fn.median), repr(fn.q3), repr(fn.maximum)]],
    )
    boxplot_svg(svg_path, fn.to_dict(), title=title)


def write_correlation(csv_path, svg_path, corr: CorrelationMatrix, title: str) -> None:
    rows = [
        [corr.labels[i]] + [repr(float(v)) for v in corr.values[i]]
        for i in range(len(corr.labels))
    ]
    _csv_out(csv_path, ["column"] + list(corr.labels), rows)
    heatmap_svg(svg_path, corr.values, corr.labels, title=title)


def write_prediction_series_csv(path, rows, branches=None) -> None:
    if branches is None:
        _csv_out(
            path,
            ["index", "actual_minutes", "predicted_minutes"],
            [[i, repr(a), repr(p)] for i, a, p in rows],
        )
    else:
        _csv_out(
            path,
            ["index", "actual_minutes", "predicted_minutes", "branch"],
            [[i, repr(a), repr(p), b] for (i, a, p), b in zip(rows, branches)],
        )


def write_histogram_csv(path, table) -> None:
    _csv_out(
        path,
        ["bin_left", "bin_right", "count"],
        [[repr(lo), repr(hi), c] for lo, hi, c in table],
    )


def write_category_counts_csv(path, pairs) -> None:
    _csv_out(path, ["category", "count"], list(pairs))


def report_dir(workdir) -> Path:
    out = Path(workdir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    return out
