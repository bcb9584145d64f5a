from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from .base import Classifier, register_family

# cap on elements materialised per distance chunk
_CHUNK_ELEMENTS = 4_000_000


def pairwise_sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances computed elementwise.

    Each entry depends only on the two rows involved, never on their
    positions, which keeps neighbour search invariant to row order.
    """
    out = np.empty((A.shape[0], B.shape[0]))
    per_row = max(1, B.shape[0] * max(1, A.shape[1]))
    step = max(1, _CHUNK_ELEMENTS // per_row)
    for start in range(0, A.shape[0], step):
        diff = A[start:start + step, None, :] - B[None, :, :]
        out[start:start + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


@register_family
class KNearestNeighbors(Classifier):
    """k-nearest-neighbour vote with additive (Laplace) smoothing.

    Distance ties at the k-th neighbour are resolved by the lower class
    label, so the prediction depends only on the training multiset.
    """

    family = "knn"
    defaults = {"k": 5, "alpha": 1.0}

    def validate_params(self):
        if int(self.params["k"]) < 1:
            raise InvalidArgument("knn: k must be >= 1")
        if self.params["alpha"] < 0:
            raise InvalidArgument("knn: alpha must be >= 0")

    def _fit(self, X, y):
        self.X_ = X.copy()
        self.y_ = y.copy()

    def neighbours(self, X: np.ndarray) -> np.ndarray:
        d = pairwise_sq_distances(X, self.X_)
        labels = np.broadcast_to(self.y_, d.shape)
        order = np.lexsort((labels, d), axis=-1)
        k = min(int(self.params["k"]), self.X_.shape[0])
        return order[:, :k]

    def _predict_proba(self, X):
        idx = self.neighbours(X)
        C = self.n_classes
        votes = np.zeros((X.shape[0], C))
        np.add.at(votes, (np.repeat(np.arange(X.shape[0]), idx.shape[1]), self.y_[idx].ravel()), 1.0)
        alpha = float(self.params["alpha"])
        return (votes + alpha) / (idx.shape[1] + alpha * C)

    def _learned(self):
        return {"X": self.X_, "y": self.y_}

    def _load(self, learned):
        self.X_ = np.asarray(learned["X"], dtype=np.float64)
        self.y_ = np.asarray(learned["y"], dtype=np.int64)
