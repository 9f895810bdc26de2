"""Histogram binning: quantize each feature into at most max_bins ordered bins.

A value's bin is the count of edges strictly below it, so bins are
left-open/right-closed intervals and a split "bin <= t" is equivalent to
"value <= edges[t]" on raw data.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

DEFAULT_MAX_BINS = 255


def build_bin_edges(values, max_bins: int = DEFAULT_MAX_BINS) -> np.ndarray:
    """Ascending edge array for one column (empty for a constant column).

    Distinct-value midpoints are used when the column has few distinct values;
    otherwise edges sit at interpolated quantiles of the distinct values, which
    keeps heavily duplicated values from swallowing the whole bin budget.
    """
    col = np.asarray(values, dtype=np.float64).ravel()
    if col.size and not np.all(np.isfinite(col)):
        raise ValueError("binning requires finite values")
    distinct = np.unique(col)
    if distinct.size <= 1:
        return np.empty(0, dtype=np.float64)
    if distinct.size <= max_bins:
        edges = (distinct[:-1] + distinct[1:]) / 2.0
    else:
        qs = np.arange(1, max_bins) / max_bins
        edges = np.unique(np.quantile(distinct, qs))
    return edges.astype(np.float64)


def bin_column(values, edges: np.ndarray) -> np.ndarray:
    """Map raw values to bin indices: number of edges strictly below the value."""
    return np.searchsorted(edges, np.asarray(values, dtype=np.float64), side="left").astype(
        np.int32
    )


class QuantileBinner(BaseEstimator, TransformerMixin):
    """Per-feature quantile binning with edges retained for inference time."""

    def __init__(self, max_bins: int = DEFAULT_MAX_BINS):
        self.max_bins = max_bins

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.bin_edges_ = [build_bin_edges(X[:, j], self.max_bins) for j in range(X.shape[1])]
        self.n_bins_ = np.array([len(e) + 1 for e in self.bin_edges_], dtype=np.int64)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "bin_edges_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        out = np.empty(X.shape, dtype=np.int32)
        for j, edges in enumerate(self.bin_edges_):
            out[:, j] = bin_column(X[:, j], edges)
        return out
