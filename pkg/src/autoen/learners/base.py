from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np

from ..errors import ArityMismatch, DegenerateInput, InvalidArgument, NonFiniteFeature, UnknownClassifier


@dataclass
class ClassifierSpec:
    """A learner family plus its hyperparameters."""

    family: str
    params: dict[str, Any] = field(default_factory=dict)

    def build(self) -> "Classifier":
        try:
            cls = FAMILIES[self.family]
        except KeyError:
            raise UnknownClassifier(f"unknown classifier family {self.family!r}") from None
        unknown = set(self.params) - set(cls.defaults)
        if unknown:
            raise UnknownClassifier(f"{self.family}: unknown hyperparameters {sorted(unknown)}")
        return cls(**self.params)

    def describe(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.family}({args})"


def check_matrix(X: np.ndarray, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DegenerateInput(f"expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ArityMismatch(f"expected {n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("feature matrix contains NaN or infinite values")
    return X


class Classifier:
    """Common interface: ``fit`` then ``predict_proba`` returning an n x C row-stochastic matrix."""

    family: ClassVar[str]
    defaults: ClassVar[dict[str, Any]] = {}

    def __init__(self, **params: Any):
        merged = dict(self.defaults)
        merged.update(params)
        self.params = merged
        self.validate_params()
        self.n_classes: int | None = None
        self.n_features: int | None = None

    def validate_params(self) -> None:
        pass

    @property
    def spec(self) -> ClassifierSpec:
        return ClassifierSpec(self.family, dict(self.params))

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "Classifier":
        X = check_matrix(X)
        if X.shape[0] == 0 or X.shape[1] == 0:
            raise DegenerateInput(f"cannot fit on a {X.shape[0]}x{X.shape[1]} matrix")
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise DegenerateInput("label vector does not match the number of rows")
        if n_classes < 2 or y.min() < 0 or y.max() >= n_classes:
            raise InvalidArgument("labels must lie in [0, n_classes) with n_classes >= 2")
        self.n_classes = int(n_classes)
        self.n_features = X.shape[1]
        self._fit(X, y)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.n_features is None:
            raise InvalidArgument(f"{self.family} is not fitted")
        X = check_matrix(X, self.n_features)
        return self._predict_proba(X)

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        raise NotImplementedError

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # persistence
    def get_state(self) -> dict[str, Any]:
        return {"family": self.family, "params": dict(self.params), "n_classes": self.n_classes,
                "n_features": self.n_features, "learned": self._learned()}

    def _learned(self) -> dict[str, Any]:
        raise NotImplementedError

    def _load(self, learned: dict[str, Any]) -> None:
        raise NotImplementedError

    @staticmethod
    def from_state(state: dict[str, Any]) -> "Classifier":
        model = ClassifierSpec(state["family"], dict(state["params"])).build()
        model.n_classes = state["n_classes"]
        model.n_features = state["n_features"]
        model._load(state["learned"])
        return model


FAMILIES: dict[str, type[Classifier]] = {}


def register_family(cls: type[Classifier]) -> type[Classifier]:
    """Make a classifier class available to portfolio files under ``cls.family``."""
    FAMILIES[cls.family] = cls
    return cls
