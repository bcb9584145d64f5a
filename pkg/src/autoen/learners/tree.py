"""CART classification trees (Gini impurity, midpoint thresholds)."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgument
from .base import Classifier, register_family

LEAF = -1


def subset_size(rule, n_features: int) -> int:
    """Number of candidate features examined per split under ``rule``."""
    if rule in (None, "all"):
        return n_features
    if rule == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if rule == "log2":
        return max(1, int(math.log2(n_features))) if n_features > 1 else 1
    if isinstance(rule, float) and 0 < rule <= 1:
        return max(1, int(rule * n_features))
    if isinstance(rule, int) and rule >= 1:
        return min(rule, n_features)
    raise InvalidArgument(f"unknown feature_subset_rule {rule!r}")


def best_split(X: np.ndarray, Y: np.ndarray, features: np.ndarray, min_leaf: int):
    """Best Gini split of the node rows ``X`` over ``features`` (sorted ascending).

    ``Y`` is the one-hot label matrix of the node. Returns
    ``(feature, threshold)`` or ``None``. Ties resolve to the lowest
    feature index, then the lowest threshold.
    """
    n = X.shape[0]
    if n < 2 * min_leaf:
        return None
    Xs = X[:, features]
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = Xs[order, np.arange(Xs.shape[1])]
    left = np.cumsum(Y[order], axis=0)[:-1]          # (n-1, f, C): rows 0..i go left
    total = left[-1, 0] + Y[order[-1, 0]]
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    right = total - left
    # maximising sum_c L_c^2/nL + R_c^2/nR minimises the weighted Gini impurity
    score = (left ** 2).sum(axis=2) / n_left + (right ** 2).sum(axis=2) / n_right
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        pos = np.arange(1, n)
        valid &= ((pos >= min_leaf) & (n - pos >= min_leaf))[:, None]
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf).T        # (f, n-1): feature-major order
    flat = int(np.argmax(score))
    j, i = divmod(flat, n - 1)
    threshold = 0.5 * (xs[i, j] + xs[i + 1, j])
    if not threshold < xs[i + 1, j]:                 # midpoint rounded up onto the right value
        threshold = xs[i, j]
    return int(features[j]), float(threshold)


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, max_depth, min_leaf: int,
              n_candidates: int, rng: np.random.Generator | None, alpha: float = 1.0) -> dict:
    """Grow a tree depth-first (left child first) and return its node arrays."""
    m = X.shape[1]
    Y = np.eye(n_classes)[y]
    feature: list[int] = []
    threshold: list[float] = []
    left_child: list[int] = []
    right_child: list[int] = []
    value: list[np.ndarray] = []

    node_counts: list[np.ndarray] = []

    def new_node(rows: np.ndarray) -> int:
        counts = np.bincount(y[rows], minlength=n_classes).astype(np.float64)
        node_counts.append(counts)
        value.append((counts + alpha) / (len(rows) + alpha * n_classes))
        feature.append(LEAF)
        threshold.append(0.0)
        left_child.append(LEAF)
        right_child.append(LEAF)
        return len(value) - 1

    root = new_node(np.arange(X.shape[0]))
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if np.count_nonzero(node_counts[node]) < 2 or len(rows) < 2 * min_leaf:
            continue
        if n_candidates < m:
            feats = np.sort(rng.choice(m, size=n_candidates, replace=False))
        else:
            feats = np.arange(m)
        split = best_split(X[rows], Y[rows], feats, min_leaf)
        if split is None:
            continue
        f, t = split
        go_left = X[rows, f] <= t
        lrows, rrows = rows[go_left], rows[~go_left]
        feature[node], threshold[node] = f, t
        left_child[node] = new_node(lrows)
        right_child[node] = new_node(rrows)
        # right pushed first so the left subtree is expanded first
        stack.append((right_child[node], rrows, depth + 1))
        stack.append((left_child[node], lrows, depth + 1))

    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=np.float64),
        "left": np.array(left_child, dtype=np.int64),
        "right": np.array(right_child, dtype=np.int64),
        "value": np.array(value, dtype=np.float64),
    }


def tree_predict_proba(nodes: dict, X: np.ndarray) -> np.ndarray:
    idx = np.zeros(X.shape[0], dtype=np.int64)
    feature, threshold = nodes["feature"], nodes["threshold"]
    left, right = nodes["left"], nodes["right"]
    active = feature[idx] != LEAF
    while active.any():
        rows = np.flatnonzero(active)
        cur = idx[rows]
        go_left = X[rows, feature[cur]] <= threshold[cur]
        idx[rows] = np.where(go_left, left[cur], right[cur])
        active[rows] = feature[idx[rows]] != LEAF
    return nodes["value"][idx]


def _check_tree_params(params: dict) -> None:
    depth = params.get("max_depth")
    if depth is not None and int(depth) < 0:
        raise InvalidArgument("max_depth must be >= 0 or None")
    if int(params.get("min_leaf", 1)) < 1:
        raise InvalidArgument("min_leaf must be >= 1")


@register_family
class DecisionTree(Classifier):
    family = "decision_tree"
    defaults = {"max_depth": None, "min_leaf": 1}

    def validate_params(self):
        _check_tree_params(self.params)

    def _fit(self, X, y):
        depth = self.params["max_depth"]
        self.nodes_ = grow_tree(X, y, self.n_classes, None if depth is None else int(depth),
                                int(self.params["min_leaf"]), X.shape[1], None)

    def _predict_proba(self, X):
        return tree_predict_proba(self.nodes_, X)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes_["feature"])

    def _learned(self):
        return dict(self.nodes_)

    def _load(self, learned):
        self.nodes_ = {k: np.asarray(v) for k, v in learned.items()}
