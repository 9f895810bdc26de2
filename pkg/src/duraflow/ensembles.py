"""The two learners behind the bi-level pipeline.

``RandomForestBinaryClassifier``: bagged gini trees with per-split feature
subsampling, level-wise depth-bounded growth.

``GradientBoostedTreeRegressor``: squared-loss boosting over leaf-wise
histogram trees; each round fits residual gradients (hessian 1) and leaves
take the value -G/(H+l2).

Both are deterministic functions of (data, random_state): per-tree seeds are
spawned up front, so thread scheduling cannot change the result.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .binning import QuantileBinner, bin_column
from .exceptions import SchemaMismatch, SingleClassTraining
from .tree import GrowParams, Tree, grow_tree


def _bin_with_edges(X: np.ndarray, bin_edges: list[np.ndarray]) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.int32)
    for j, edges in enumerate(bin_edges):
        out[:, j] = bin_column(X[:, j], edges)
    return out


def _check_predict_input(model, X, schema_fingerprint=None) -> np.ndarray:
    check_is_fitted(model, "bin_edges_")
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != model.n_features_in_:
        raise SchemaMismatch(
            f"model expects {model.n_features_in_} features, got {X.shape[1]}"
        )
    if (
        schema_fingerprint is not None
        and model.schema_fingerprint_ is not None
        and schema_fingerprint != model.schema_fingerprint_
    ):
        raise SchemaMismatch("schema fingerprint does not match the fitted model")
    return X


class RandomForestBinaryClassifier(BaseEstimator, ClassifierMixin):
    """Bootstrap-aggregated binary decision forest over histogram bins."""

    def __init__(
        self,
        n_trees: int = 100,
        mtry: int | None = None,
        max_depth: int = 16,
        min_samples_leaf: int = 5,
        min_gain: float = 1e-7,
        max_bins: int = 255,
        bootstrap: bool = True,
        random_state: int = 0,
        n_threads: int = 1,
    ):
        self.n_trees = n_trees
        self.mtry = mtry
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_gain = min_gain
        self.max_bins = max_bins
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_threads = n_threads

    def fit(self, X, y, schema_fingerprint: str | None = None):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y).ravel().astype(np.int64)
        if len(y) != len(X):
            raise ValueError("X and y length mismatch")
        present = np.unique(y)
        if not set(present.tolist()) <= {0, 1}:
            raise ValueError(f"labels must be binary 0/1, got {present.tolist()}")
        if len(present) < 2:
            raise SingleClassTraining(
                f"training data contains only label {present[0]}; need both classes"
            )

        binner = QuantileBinner(max_bins=self.max_bins).fit(X)
        Xb = binner.transform(X)
        n, n_features = Xb.shape
        mtry = self.mtry if self.mtry is not None else max(1, int(np.sqrt(n_features)))
        params = GrowParams(
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            min_gain=self.min_gain,
            impurity="gini",
            growth="level_wise",
            mtry=mtry,
        )
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_trees)

        def build(seed) -> Tree:
            rng = np.random.default_rng(seed)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            return grow_tree(Xb[idx], binner.n_bins_, params, labels=y[idx], rng=rng)

        if self.n_threads > 1:
            with ThreadPoolExecutor(max_workers=self.n_threads) as pool:
                trees = list(pool.map(build, seeds))
        else:
            trees = [build(s) for s in seeds]

        self.trees_ = trees
        self.bin_edges_ = binner.bin_edges_
        self.n_bins_ = binner.n_bins_
        self.n_features_in_ = n_features
        self.mtry_ = mtry
        self.classes_ = np.array([0, 1])
        self.schema_fingerprint_ = schema_fingerprint
        return self

    def predict_proba(self, X, schema_fingerprint: str | None = None) -> np.ndarray:
        """Mean over trees of each tree's normalized leaf class counts."""
        X = _check_predict_input(self, X, schema_fingerprint)
        Xb = _bin_with_edges(X, self.bin_edges_)
        proba = np.zeros((len(X), 2), dtype=np.float64)
        for tree in self.trees_:
            counts = tree.predict_binned(Xb)
            proba += counts / counts.sum(axis=1, keepdims=True)
        return proba / len(self.trees_)

    def predict(self, X, schema_fingerprint: str | None = None) -> np.ndarray:
        """Majority label; an exact probability tie routes to 0 (long)."""
        proba = self.predict_proba(X, schema_fingerprint)
        return (proba[:, 1] > proba[:, 0]).astype(np.int64)


class GradientBoostedTreeRegressor(BaseEstimator, RegressorMixin):
    """Histogram gradient boosting for duration regression (squared loss)."""

    def __init__(
        self,
        n_rounds: int = 500,
        learning_rate: float = 0.05,
        max_leaves: int = 31,
        max_depth: int | None = None,
        min_samples_leaf: int = 20,
        min_gain: float = 1e-7,
        lambda_l2: float = 1.0,
        max_bins: int = 255,
        early_stopping_rounds: int | None = 50,
        validation_fraction: float = 0.1,
        random_state: int = 0,
    ):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_leaves = max_leaves
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_gain = min_gain
        self.lambda_l2 = lambda_l2
        self.max_bins = max_bins
        self.early_stopping_rounds = early_stopping_rounds
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def fit(self, X, y, schema_fingerprint: str | None = None):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(y) != len(X):
            raise ValueError("X and y length mismatch")
        if len(y) < 2:
            raise ValueError("boosting requires at least 2 rows")

        binner = QuantileBinner(max_bins=self.max_bins).fit(X)
        Xb = binner.transform(X)
        n = len(y)

        # Optional early-stopping carve-out, drawn from the training rows only.
        val_idx = np.empty(0, dtype=np.int64)
        n_val = int(round(self.validation_fraction * n))
        if self.early_stopping_rounds and n_val >= 1 and n - n_val >= 2:
            perm = np.random.default_rng(self.random_state).permutation(n)
            val_idx = np.sort(perm[:n_val])
            fit_idx = np.sort(perm[n_val:])
        else:
            fit_idx = np.arange(n)
        Xb_fit, y_fit = Xb[fit_idx], y[fit_idx]
        Xb_val, y_val = Xb[val_idx], y[val_idx]

        base = float(np.mean(y_fit))
        pred = np.full(len(y_fit), base)
        pred_val = np.full(len(y_val), base)
        params = GrowParams(
            max_depth=self.max_depth,
            max_leaves=self.max_leaves,
            min_samples_leaf=self.min_samples_leaf,
            min_gain=self.min_gain,
            lambda_l2=self.lambda_l2,
            impurity="sq_loss",
            growth="leaf_wise",
        )

        trees: list[Tree] = []
        train_mse = [float(np.mean((pred - y_fit) ** 2))]
        best_rmse, best_round, val_rmse = np.inf, 0, []
        for _ in range(self.n_rounds):
            grad = pred - y_fit
            tree = grow_tree(Xb_fit, binner.n_bins_, params, grad=grad)
            trees.append(tree)
            pred = pred + self.learning_rate * tree.predict_binned(Xb_fit)
            train_mse.append(float(np.mean((pred - y_fit) ** 2)))
            if len(val_idx):
                pred_val = pred_val + self.learning_rate * tree.predict_binned(Xb_val)
                rmse_t = float(np.sqrt(np.mean((pred_val - y_val) ** 2)))
                val_rmse.append(rmse_t)
                if rmse_t < best_rmse:
                    best_rmse, best_round = rmse_t, len(trees)
                elif len(trees) - best_round >= self.early_stopping_rounds:
                    break

        if len(val_idx) and trees:
            trees = trees[:best_round]

        self.trees_ = trees
        self.base_score_ = base
        self.bin_edges_ = binner.bin_edges_
        self.n_bins_ = binner.n_bins_
        self.n_features_in_ = Xb.shape[1]
        self.train_mse_path_ = train_mse
        self.validation_rmse_path_ = val_rmse
        self.best_round_ = len(trees)
        self.schema_fingerprint_ = schema_fingerprint
        return self

    def _raw_predict(self, X, schema_fingerprint: str | None = None) -> np.ndarray:
        X = _check_predict_input(self, X, schema_fingerprint)
        Xb = _bin_with_edges(X, self.bin_edges_)
        out = np.full(len(X), self.base_score_)
        for tree in self.trees_:
            out = out + self.learning_rate * tree.predict_binned(Xb)
        return out

    def predict(self, X, schema_fingerprint: str | None = None) -> np.ndarray:
        """Additive score clipped below at zero minutes."""
        return np.maximum(self._raw_predict(X, schema_fingerprint), 0.0)
