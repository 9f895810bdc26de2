"""Histogram-binned CART growth shared by the forest and the booster.

Trees live in flat arrays (children always indexed after their parent, root
at 0). Splits are expressed on bin indices (a row goes left iff its bin for
the split feature is <= the stored threshold), which reproduces training-time
decisions exactly at inference.

Two impurity modes: 'gini' maximizes the weighted Gini decrease over binary
class counts; 'sq_loss' maximizes the second-order gain
G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - G^2/(H+l2) over gradient/hessian sums.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class GrowParams:
    max_depth: int | None = None
    max_leaves: int | None = None
    min_samples_leaf: int = 1
    min_gain: float = 1e-7
    lambda_l2: float = 0.0
    impurity: str = "gini"  # gini | sq_loss
    growth: str = "leaf_wise"  # leaf_wise | level_wise
    mtry: int | None = None  # features sampled per split; None = all

    def __post_init__(self):
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_leaves is not None and self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2 or None")
        if self.impurity not in ("gini", "sq_loss"):
            raise ValueError("impurity must be 'gini' or 'sq_loss'")
        if self.growth not in ("leaf_wise", "level_wise"):
            raise ValueError("growth must be 'leaf_wise' or 'level_wise'")
        if self.lambda_l2 < 0:
            raise ValueError("lambda_l2 must be >= 0")


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: int  # bin index; left branch takes bins <= threshold
    gain: float
    n_left: int
    n_right: int


@dataclass
class Tree:
    """Flat-array decision tree. feature == -1 marks a leaf."""

    feature: np.ndarray  # int32, -1 at leaves
    threshold: np.ndarray  # int32 bin index, -1 at leaves
    left: np.ndarray  # int32 child ids, -1 at leaves
    right: np.ndarray
    cover: np.ndarray  # float64 training sample count per node
    value: np.ndarray  # float64 scalar per node (regression leaf values)
    class_counts: np.ndarray | None = None  # float64 (n_nodes, 2) for classifiers

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def is_classifier(self) -> bool:
        return self.class_counts is not None

    def depths(self) -> np.ndarray:
        out = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                out[self.left[node]] = out[node] + 1
                out[self.right[node]] = out[node] + 1
        return out

    def max_depth(self) -> int:
        return int(self.depths().max()) if self.n_nodes else 0

    def leaf_ids(self, Xb: np.ndarray) -> np.ndarray:
        """Vectorized root-to-leaf traversal over binned rows."""
        node = np.zeros(len(Xb), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            rows = np.nonzero(active)[0]
            f = feat[rows]
            go_left = Xb[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict_binned(self, Xb: np.ndarray) -> np.ndarray:
        """Leaf values (regression) or leaf class-count vectors (classification)."""
        leaves = self.leaf_ids(Xb)
        if self.is_classifier:
            return self.class_counts[leaves]
        return self.value[leaves]

    def to_dot(
        self,
        feature_names: Sequence[str] | None = None,
        bin_edges: Sequence[np.ndarray] | None = None,
        name: str = "tree",
    ) -> str:
        """DOT text, one node per line; labels show the split or the leaf value."""
        lines = [f"digraph {name} {{"]
        for node in range(self.n_nodes):
            if self.feature[node] < 0:
                if self.is_classifier:
                    c = self.class_counts[node]
                    label = f"leaf counts=[{c[0]:g}, {c[1]:g}]"
                else:
                    label = f"leaf {self.value[node]:.6g}"
            else:
                f = int(self.feature[node])
                t = int(self.threshold[node])
                fname = feature_names[f] if feature_names else f"f{f}"
                if bin_edges is not None and t < len(bin_edges[f]):
                    label = f"{fname} <= {bin_edges[f][t]:.6g}"
                else:
                    label = f"{fname} <= bin {t}"
            lines.append(f'  n{node} [label="{label} | cover={self.cover[node]:g}"];')
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                lines.append(f'  n{node} -> n{int(self.left[node])} [label="yes"];')
                lines.append(f'  n{node} -> n{int(self.right[node])} [label="no"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


class _TreeBuilder:
    """Accumulates flat node arrays during growth."""

    def __init__(self, classifier: bool):
        self.feature: list[int] = []
        self.threshold: list[int] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.cover: list[float] = []
        self.value: list[float] = []
        self.counts: list[tuple[float, float]] = []
        self.classifier = classifier

    def add_node(self, cover: float, value: float, counts=(0.0, 0.0)) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(-1)
        self.left.append(-1)
        self.right.append(-1)
        self.cover.append(cover)
        self.value.append(value)
        self.counts.append(counts)
        return node

    def set_split(self, node: int, feature: int, threshold: int, left: int, right: int):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.int32),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            cover=np.asarray(self.cover, dtype=np.float64),
            value=np.asarray(self.value, dtype=np.float64),
            class_counts=np.asarray(self.counts, dtype=np.float64)
            if self.classifier else None,
        )


def _node_histograms(
    Xb: np.ndarray, idx: np.ndarray, feats: np.ndarray, n_bins: np.ndarray,
    w1: np.ndarray, w2: np.ndarray | None,
) -> tuple[list, list, list | None]:
    """Per-feature bin histograms of counts and weighted sums for one node.

    Flattens (row, feature) bin codes into a single bincount pass per
    statistic; returns ragged per-feature slices.
    """
    sizes = n_bins[feats]
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    codes = Xb[np.ix_(idx, feats)] + offsets[:-1][np.newaxis, :]
    flat = codes.ravel()
    total = int(offsets[-1])
    nf = len(feats)
    counts = np.bincount(flat, minlength=total).astype(np.float64)
    sums1 = np.bincount(flat, weights=np.repeat(w1[idx], nf), minlength=total)
    sums2 = None
    if w2 is not None:
        sums2 = np.bincount(flat, weights=np.repeat(w2[idx], nf), minlength=total)
    counts_per = [counts[offsets[k]:offsets[k + 1]] for k in range(nf)]
    sums1_per = [sums1[offsets[k]:offsets[k + 1]] for k in range(nf)]
    sums2_per = (
        [sums2[offsets[k]:offsets[k + 1]] for k in range(nf)] if sums2 is not None else None
    )
    return counts_per, sums1_per, sums2_per


def _gini_from_counts(n0, n1):
    n = n0 + n1
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 1.0 - (n0 * n0 + n1 * n1) / (n * n)
    return np.where(n > 0, g, 0.0)


def best_split(
    feats: np.ndarray,
    counts_per: list,
    stat1_per: list,
    stat2_per: list | None,
    params: GrowParams,
) -> SplitCandidate | None:
    """Best (feature, bin threshold) by gain; ties go to the lower feature
    index then the lower threshold. Returns None when no candidate clears
    min_gain and the min_samples_leaf constraint."""
    msl = params.min_samples_leaf
    best: SplitCandidate | None = None
    best_gain = -np.inf
    for k, f in enumerate(feats):
        c = counts_per[k]
        if len(c) < 2:
            continue
        nL = np.cumsum(c)[:-1]
        n = c.sum()
        nR = n - nL
        valid = (nL >= msl) & (nR >= msl)
        if not valid.any():
            continue
        if params.impurity == "gini":
            c1 = stat1_per[k]
            n1L = np.cumsum(c1)[:-1]
            n1 = c1.sum()
            n0L = nL - n1L
            parent = float(_gini_from_counts(n - n1, n1))
            child = (
                nL * _gini_from_counts(n0L, n1L)
                + nR * _gini_from_counts((n - n1) - n0L, n1 - n1L)
            ) / n
            gains = parent - child
        else:
            g = stat1_per[k]
            h = stat2_per[k]
            GL = np.cumsum(g)[:-1]
            HL = np.cumsum(h)[:-1]
            G = g.sum()
            H = h.sum()
            lam = params.lambda_l2
            with np.errstate(divide="ignore", invalid="ignore"):
                gains = GL**2 / (HL + lam) + (G - GL) ** 2 / (H - HL + lam) - G**2 / (H + lam)
        gains = np.where(valid, gains, -np.inf)
        t = int(np.argmax(gains))  # first occurrence wins within a feature
        if gains[t] > best_gain:
            best_gain = float(gains[t])
            best = SplitCandidate(
                feature=int(f), threshold=t, gain=best_gain,
                n_left=int(nL[t]), n_right=int(nR[t]),
            )
    if best is None or best.gain < params.min_gain:
        return None
    return best


@dataclass
class _NodeState:
    node: int
    depth: int
    idx: np.ndarray


def grow_tree(
    Xb: np.ndarray,
    n_bins: np.ndarray,
    params: GrowParams,
    labels: np.ndarray | None = None,
    grad: np.ndarray | None = None,
    hess: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow one tree over pre-binned data.

    gini mode takes binary labels and stores class counts at every node;
    sq_loss mode takes (grad, hess) and stores leaf values -G/(H+l2).
    leaf_wise growth expands the highest-gain frontier node first and honors
    max_leaves; level_wise expands breadth-first under the depth bound (the
    forest's mode; max_leaves is not applied there).
    """
    n, n_features = Xb.shape
    if params.impurity == "gini":
        if labels is None:
            raise ValueError("gini growth requires labels")
        labels = np.asarray(labels, dtype=np.float64)
    else:
        if grad is None:
            raise ValueError("sq_loss growth requires gradients")
        grad = np.asarray(grad, dtype=np.float64)
        hess = (
            np.ones(n, dtype=np.float64) if hess is None else np.asarray(hess, dtype=np.float64)
        )

    builder = _TreeBuilder(classifier=params.impurity == "gini")
    all_feats = np.arange(n_features, dtype=np.int64)
    use_mtry = params.mtry is not None and params.mtry < n_features

    def make_node(idx: np.ndarray, depth: int) -> _NodeState:
        cover = float(len(idx))
        if params.impurity == "gini":
            c1 = float(labels[idx].sum())
            builder.add_node(cover, 0.0, (cover - c1, c1))
        else:
            G = float(grad[idx].sum())
            H = float(hess[idx].sum())
            builder.add_node(cover, -G / (H + params.lambda_l2), (0.0, 0.0))
        return _NodeState(node=len(builder.feature) - 1, depth=depth, idx=idx)

    def find_candidate(state: _NodeState) -> SplitCandidate | None:
        if len(state.idx) < 2 * params.min_samples_leaf:
            return None
        if params.max_depth is not None and state.depth >= params.max_depth:
            return None
        feats = all_feats
        if use_mtry:
            feats = np.sort(rng.choice(n_features, size=params.mtry, replace=False))
        if params.impurity == "gini":
            counts_per, stat1_per, _ = _node_histograms(
                Xb, state.idx, feats, n_bins, labels, None
            )
            return best_split(feats, counts_per, stat1_per, None, params)
        counts_per, stat1_per, stat2_per = _node_histograms(
            Xb, state.idx, feats, n_bins, grad, hess
        )
        return best_split(feats, counts_per, stat1_per, stat2_per, params)

    def split_node(state: _NodeState, cand: SplitCandidate) -> tuple[_NodeState, _NodeState]:
        go_left = Xb[state.idx, cand.feature] <= cand.threshold
        left_state = make_node(state.idx[go_left], state.depth + 1)
        right_state = make_node(state.idx[~go_left], state.depth + 1)
        builder.set_split(
            state.node, cand.feature, cand.threshold, left_state.node, right_state.node
        )
        return left_state, right_state

    root = make_node(np.arange(n, dtype=np.int64), 0)

    if params.growth == "leaf_wise":
        counter = 0
        heap: list[tuple[float, int, _NodeState, SplitCandidate]] = []
        cand = find_candidate(root)
        if cand is not None:
            heapq.heappush(heap, (-cand.gain, counter, root, cand))
            counter += 1
        n_leaves = 1
        limit = params.max_leaves if params.max_leaves is not None else np.inf
        while heap and n_leaves < limit:
            _, _, state, cand = heapq.heappop(heap)
            for child in split_node(state, cand):
                child_cand = find_candidate(child)
                if child_cand is not None:
                    heapq.heappush(heap, (-child_cand.gain, counter, child, child_cand))
                    counter += 1
            n_leaves += 1
    else:
        queue: deque[_NodeState] = deque([root])
        while queue:
            state = queue.popleft()
            cand = find_candidate(state)
            if cand is None:
                continue
            queue.extend(split_node(state, cand))

    return builder.finish()
