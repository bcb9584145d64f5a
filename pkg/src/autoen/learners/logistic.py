from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from .base import Classifier, register_family


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


@register_family
class LogisticRegression(Classifier):
    """Multinomial (softmax) logistic regression by full-batch gradient descent.

    The step is ``learning_rate / L`` where ``L`` bounds the curvature of the
    regularised loss: ``0.5 * lambda_max(X1'X1 / n) + l2_penalty`` with
    ``X1`` the design matrix plus an intercept column. Any learning_rate in
    (0, 2) therefore never increases the training loss. The intercept is
    not penalised.
    """

    family = "logistic"
    defaults = {"l2_penalty": 1e-4, "epochs": 300, "learning_rate": 1.0, "seed": 0}

    def validate_params(self):
        p = self.params
        if p["l2_penalty"] < 0:
            raise InvalidArgument("logistic: l2_penalty must be >= 0")
        if int(p["epochs"]) < 1:
            raise InvalidArgument("logistic: epochs must be >= 1")
        if not p["learning_rate"] > 0:
            raise InvalidArgument("logistic: learning_rate must be > 0")

    @staticmethod
    def _design(X: np.ndarray) -> np.ndarray:
        return np.hstack([X, np.ones((X.shape[0], 1))])

    def loss(self, X1: np.ndarray, Y: np.ndarray, W: np.ndarray) -> float:
        P = softmax(X1 @ W)
        ce = -np.mean(np.log(np.clip((P * Y).sum(axis=1), 1e-300, None)))
        return float(ce + 0.5 * self.params["l2_penalty"] * np.sum(W[:-1] ** 2))

    def _fit(self, X, y):
        n = X.shape[0]
        C = self.n_classes
        X1 = self._design(X)
        Y = np.eye(C)[y]
        l2 = float(self.params["l2_penalty"])
        gram = X1 @ X1.T if X1.shape[0] < X1.shape[1] else X1.T @ X1
        curvature = 0.5 * float(np.linalg.eigvalsh(gram / n)[-1]) + l2
        step = float(self.params["learning_rate"]) / curvature
        rng = np.random.default_rng(int(self.params["seed"]))
        W = 1e-3 * rng.standard_normal((X1.shape[1], C))
        penalty_mask = np.ones((X1.shape[1], 1))
        penalty_mask[-1] = 0.0
        history = []
        for _ in range(int(self.params["epochs"])):
            P = softmax(X1 @ W)
            history.append(float(-np.mean(np.log(np.clip((P * Y).sum(axis=1), 1e-300, None)))
                                 + 0.5 * l2 * np.sum(W[:-1] ** 2)))
            grad = X1.T @ (P - Y) / n + l2 * W * penalty_mask
            W = W - step * grad
        history.append(self.loss(X1, Y, W))
        self.W_ = W
        self.loss_history_ = np.array(history)

    def _predict_proba(self, X):
        return softmax(self._design(X) @ self.W_)

    def _learned(self):
        return {"W": self.W_, "loss_history": self.loss_history_}

    def _load(self, learned):
        self.W_ = np.asarray(learned["W"], dtype=np.float64)
        self.loss_history_ = np.asarray(learned["loss_history"], dtype=np.float64)
