from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from .base import Classifier, register_family


def _canonical_rows(X: np.ndarray) -> np.ndarray:
    # fixed summation order regardless of how the caller ordered the rows
    return X[np.lexsort(X.T[::-1])] if X.shape[0] > 1 else X


@register_family
class GaussianNaiveBayes(Classifier):
    """Per-class independent Gaussians.

    Every per-class variance is inflated by ``var_smoothing`` times the
    largest feature variance. Classes absent from the training rows get
    probability zero.
    """

    family = "gaussian_nb"
    defaults = {"var_smoothing": 1e-9}

    def validate_params(self):
        if self.params["var_smoothing"] < 0:
            raise InvalidArgument("gaussian_nb: var_smoothing must be >= 0")

    def _fit(self, X, y):
        C, m = self.n_classes, X.shape[1]
        epsilon = float(self.params["var_smoothing"]) * float(_canonical_rows(X).var(axis=0).max())
        if epsilon <= 0:
            epsilon = 1e-12
        self.theta_ = np.zeros((C, m))
        self.var_ = np.ones((C, m))
        self.log_prior_ = np.full(C, -np.inf)
        counts = np.bincount(y, minlength=C)
        for c in range(C):
            if counts[c] == 0:
                continue
            Xc = _canonical_rows(X[y == c])
            self.theta_[c] = Xc.mean(axis=0)
            self.var_[c] = Xc.var(axis=0) + epsilon
            self.log_prior_[c] = np.log(counts[c] / len(y))

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        const = -0.5 * np.log(2.0 * np.pi * self.var_).sum(axis=1)
        quad = ((X[:, None, :] - self.theta_[None, :, :]) ** 2 / self.var_[None, :, :]).sum(axis=2)
        return self.log_prior_ + const - 0.5 * quad

    def _predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        jll = jll - jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def _learned(self):
        return {"theta": self.theta_, "var": self.var_, "log_prior": self.log_prior_}

    def _load(self, learned):
        self.theta_ = np.asarray(learned["theta"], dtype=np.float64)
        self.var_ = np.asarray(learned["var"], dtype=np.float64)
        self.log_prior_ = np.asarray(learned["log_prior"], dtype=np.float64)
