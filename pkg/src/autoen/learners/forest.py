from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from .base import Classifier, register_family
from .tree import _check_tree_params, grow_tree, subset_size, tree_predict_proba


@register_family
class RandomForest(Classifier):
    """Bagged CART trees with per-split random feature subsets.

    Tree ``t`` draws its bootstrap sample and feature subsets from a
    generator seeded with ``seed + t``, so trees are independent of the
    order or concurrency in which they are grown. The forest probability is
    the plain mean of the tree probabilities.
    """

    family = "random_forest"
    defaults = {"n_trees": 10, "max_depth": None, "min_leaf": 1, "feature_subset_rule": "sqrt", "seed": 0}

    def validate_params(self):
        if int(self.params["n_trees"]) < 1:
            raise InvalidArgument("random_forest: n_trees must be >= 1")
        _check_tree_params(self.params)
        subset_size(self.params["feature_subset_rule"], 1)

    def _fit(self, X, y):
        n, m = X.shape
        depth = self.params["max_depth"]
        depth = None if depth is None else int(depth)
        n_cand = subset_size(self.params["feature_subset_rule"], m)
        self.trees_ = []
        for t in range(int(self.params["n_trees"])):
            rng = np.random.default_rng(int(self.params["seed"]) + t)
            boot = rng.integers(0, n, size=n)
            self.trees_.append(grow_tree(X[boot], y[boot], self.n_classes, depth,
                                         int(self.params["min_leaf"]), n_cand, rng))

    def tree_probas(self, X: np.ndarray) -> np.ndarray:
        return np.stack([tree_predict_proba(nodes, X) for nodes in self.trees_])

    def _predict_proba(self, X):
        return np.mean(self.tree_probas(X), axis=0)

    def _learned(self):
        return {"trees": [dict(t) for t in self.trees_]}

    def _load(self, learned):
        self.trees_ = [{k: np.asarray(v) for k, v in t.items()} for t in learned["trees"]]
