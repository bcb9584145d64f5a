"""Fitted, replayable preprocessing steps mapping a Dataset to a numeric matrix.

A chain is applied column-wise: imputation and one-hot encoding understand
mixed columns, every other step is numeric-only and refuses categorical or
missing input.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .dataset import Column, Dataset, FeatureKind
from .errors import ArityMismatch, ChainOrderInvalid, EmptyOutput, InvalidArgument, UnknownColumn, UnknownStep

MISSING_CATEGORY = "<missing>"

Layout = list  # list[tuple[str, FeatureKind]]


# ---------------------------------------------------------------- step kinds


@dataclass(frozen=True)
class ImputeMeanMode:
    name = "impute"


@dataclass(frozen=True)
class OneHotEncode:
    name = "onehot"


@dataclass(frozen=True)
class StandardScale:
    name = "standard_scale"


@dataclass(frozen=True)
class MinMaxScale:
    name = "minmax_scale"


@dataclass(frozen=True)
class VarianceFilter:
    threshold: float = 0.0
    name = "variance_filter"

    def __post_init__(self):
        if self.threshold < 0:
            raise InvalidArgument("variance threshold must be >= 0")


@dataclass(frozen=True)
class PolynomialExpand:
    degree: int = 2
    name = "polynomial"

    def __post_init__(self):
        if self.degree != 2:
            raise InvalidArgument("only degree-2 polynomial expansion is supported")


TransformKind = ImputeMeanMode | OneHotEncode | StandardScale | MinMaxScale | VarianceFilter | PolynomialExpand

STEP_TYPES: dict[str, type] = {
    t.name: t for t in (ImputeMeanMode, OneHotEncode, StandardScale, MinMaxScale, VarianceFilter, PolynomialExpand)
}


def step_params(step: TransformKind) -> dict[str, Any]:
    if isinstance(step, VarianceFilter):
        return {"threshold": step.threshold}
    if isinstance(step, PolynomialExpand):
        return {"degree": step.degree}
    return {}


def make_step(name: str, **params: Any) -> TransformKind:
    if name not in STEP_TYPES:
        raise UnknownStep(f"unknown preprocessing step {name!r}")
    try:
        return STEP_TYPES[name](**params)
    except TypeError as exc:
        raise UnknownStep(f"bad parameters for step {name!r}: {exc}") from None


# ---------------------------------------------------------------- fitted steps


def _layout(columns: Sequence[Column]) -> Layout:
    return [(c.name, c.kind) for c in columns]


def _numeric_matrix(columns: Sequence[Column], step: str) -> np.ndarray:
    for c in columns:
        if c.kind is not FeatureKind.NUMERIC:
            raise ChainOrderInvalid(f"{step} received categorical column {c.name!r}; encode it first")
    n = len(columns[0].values) if columns else 0
    X = np.column_stack([c.values for c in columns]) if columns else np.empty((n, 0))
    if np.isnan(X).any():
        raise ChainOrderInvalid(f"{step} received missing values; impute them first")
    return X.astype(np.float64, copy=False)


def _numeric_columns(names: Sequence[str], X: np.ndarray) -> list[Column]:
    return [Column(name, FeatureKind.NUMERIC, X[:, j]) for j, name in enumerate(names)]


class FittedTransform:
    """Learned state of one step; immutable once fitted."""

    kind: str

    def __init__(self, input_layout: Layout, output_layout: Layout):
        self.input_layout = [(n, FeatureKind(k)) for n, k in input_layout]
        self.output_layout = [(n, FeatureKind(k)) for n, k in output_layout]

    @property
    def input_arity(self) -> int:
        return len(self.input_layout)

    @property
    def output_arity(self) -> int:
        return len(self.output_layout)

    def _check(self, columns: Sequence[Column]) -> None:
        if len(columns) != self.input_arity:
            raise ArityMismatch(f"{self.kind}: got {len(columns)} columns, fitted on {self.input_arity}")
        for (name, kind), col in zip(self.input_layout, columns):
            if col.name != name:
                raise UnknownColumn(f"{self.kind}: unexpected column {col.name!r} (fitted on {name!r})")
            if col.kind is not kind:
                raise ArityMismatch(f"{self.kind}: column {name!r} changed kind to {col.kind.value}")

    def apply(self, columns: Sequence[Column]) -> list[Column]:
        self._check(columns)
        return self._apply(columns)

    def _apply(self, columns: Sequence[Column]) -> list[Column]:
        raise NotImplementedError

    # persistence: plain dicts of json-able values and numpy arrays
    def get_state(self) -> dict[str, Any]:
        return {"kind": self.kind,
                "input_layout": [[n, k.value] for n, k in self.input_layout],
                "output_layout": [[n, k.value] for n, k in self.output_layout],
                "params": self._params()}

    def _params(self) -> dict[str, Any]:
        return {}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "FittedTransform":
        sub = FITTED_TYPES[state["kind"]]
        obj = sub.__new__(sub)
        FittedTransform.__init__(obj, state["input_layout"], state["output_layout"])
        obj._load(state["params"])
        return obj

    def _load(self, params: dict[str, Any]) -> None:
        pass


class FittedImpute(FittedTransform):
    kind = "impute"

    def __init__(self, columns: Sequence[Column]):
        super().__init__(_layout(columns), _layout(columns))
        fill: list[Any] = []
        for c in columns:
            mask = c.missing_mask()
            if c.kind is FeatureKind.NUMERIC:
                present = c.values[~mask]
                fill.append(float(present.mean()) if present.size else 0.0)
            else:
                counts = Counter(v for v in c.values[~mask])
                if counts:
                    top = max(counts.values())
                    fill.append(min(k for k, v in counts.items() if v == top))
                else:
                    fill.append(MISSING_CATEGORY)
        self.fill = fill

    def _apply(self, columns):
        out = []
        for c, value in zip(columns, self.fill):
            mask = c.missing_mask()
            if not mask.any():
                out.append(c)
                continue
            vals = c.values.copy()
            vals[mask] = value
            out.append(Column(c.name, c.kind, vals))
        return out

    def _params(self):
        return {"fill": list(self.fill)}

    def _load(self, params):
        self.fill = list(params["fill"])


class FittedOneHot(FittedTransform):
    kind = "onehot"

    def __init__(self, columns: Sequence[Column]):
        vocab: list[list[str] | None] = []
        out: Layout = []
        for c in columns:
            if c.kind is FeatureKind.CATEGORICAL:
                cats = sorted({v for v in c.values if v is not None})
                vocab.append(cats)
                out.extend((f"{c.name}={v}", FeatureKind.NUMERIC) for v in cats)
            else:
                vocab.append(None)
                out.append((c.name, c.kind))
        super().__init__(_layout(columns), out)
        self.vocab = vocab

    def _apply(self, columns):
        out: list[Column] = []
        j = 0
        for c, cats in zip(columns, self.vocab):
            if cats is None:
                out.append(c)
                j += 1
                continue
            index = {v: i for i, v in enumerate(cats)}
            block = np.zeros((len(c.values), len(cats)))
            for r, v in enumerate(c.values):
                i = index.get(v)
                if i is not None:  # unseen or missing -> all-zero block
                    block[r, i] = 1.0
            for i in range(len(cats)):
                out.append(Column(self.output_layout[j][0], FeatureKind.NUMERIC, block[:, i]))
                j += 1
        return out

    def _params(self):
        return {"vocab": self.vocab}

    def _load(self, params):
        self.vocab = params["vocab"]


class _NumericStep(FittedTransform):
    """Base for steps that act on an all-numeric, complete matrix."""

    def _apply(self, columns):
        X = _numeric_matrix(columns, self.kind)
        return _numeric_columns([n for n, _ in self.output_layout], self.transform(X))

    def transform(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FittedStandardScale(_NumericStep):
    kind = "standard_scale"

    def __init__(self, columns):
        X = _numeric_matrix(columns, self.kind)
        super().__init__(_layout(columns), _layout(columns))
        self.mean = X.mean(axis=0)
        self.std = X.std(axis=0)

    def transform(self, X):
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (X - self.mean) / safe, 0.0)

    def _params(self):
        return {"mean": self.mean, "std": self.std}

    def _load(self, params):
        self.mean, self.std = np.asarray(params["mean"]), np.asarray(params["std"])


class FittedMinMaxScale(_NumericStep):
    kind = "minmax_scale"

    def __init__(self, columns):
        X = _numeric_matrix(columns, self.kind)
        super().__init__(_layout(columns), _layout(columns))
        if X.shape[0]:
            self.low, self.high = X.min(axis=0), X.max(axis=0)
        else:
            self.low = self.high = np.zeros(X.shape[1])

    def transform(self, X):
        span = self.high - self.low
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (X - self.low) / safe, 0.0)

    def _params(self):
        return {"low": self.low, "high": self.high}

    def _load(self, params):
        self.low, self.high = np.asarray(params["low"]), np.asarray(params["high"])


class FittedVarianceFilter(_NumericStep):
    kind = "variance_filter"

    def __init__(self, columns, threshold: float):
        X = _numeric_matrix(columns, self.kind)
        keep = X.var(axis=0) > threshold
        if not keep.any():
            raise EmptyOutput(f"variance filter (threshold={threshold}) removed every column")
        layout = _layout(columns)
        super().__init__(layout, [layout[j] for j in np.flatnonzero(keep)])
        self.threshold = float(threshold)
        self.keep = np.flatnonzero(keep)

    def transform(self, X):
        return X[:, self.keep]

    def _params(self):
        return {"threshold": self.threshold, "keep": self.keep}

    def _load(self, params):
        self.threshold = float(params["threshold"])
        self.keep = np.asarray(params["keep"], dtype=np.int64)


class FittedPolynomial(_NumericStep):
    kind = "polynomial"

    def __init__(self, columns):
        _numeric_matrix(columns, self.kind)
        layout = _layout(columns)
        m = len(layout)
        left, right = np.triu_indices(m)  # (i, j), i <= j, lexicographic
        names = [n for n, _ in layout]
        out = layout + [(f"{names[i]}*{names[j]}", FeatureKind.NUMERIC) for i, j in zip(left, right)]
        super().__init__(layout, out)

    def transform(self, X):
        left, right = np.triu_indices(X.shape[1])
        return np.hstack([X, X[:, left] * X[:, right]])


FITTED_TYPES: dict[str, type] = {
    t.kind: t for t in (FittedImpute, FittedOneHot, FittedStandardScale, FittedMinMaxScale,
                        FittedVarianceFilter, FittedPolynomial)
}


def _fit_step(step: TransformKind, columns: list[Column]) -> FittedTransform:
    if isinstance(step, ImputeMeanMode):
        return FittedImpute(columns)
    if isinstance(step, OneHotEncode):
        return FittedOneHot(columns)
    if isinstance(step, StandardScale):
        return FittedStandardScale(columns)
    if isinstance(step, MinMaxScale):
        return FittedMinMaxScale(columns)
    if isinstance(step, VarianceFilter):
        return FittedVarianceFilter(columns, step.threshold)
    if isinstance(step, PolynomialExpand):
        return FittedPolynomial(columns)
    raise InvalidArgument(f"not a preprocessing step: {step!r}")


def _final_matrix(columns: list[Column]) -> np.ndarray:
    if not columns:
        raise EmptyOutput("preprocessing produced no feature columns")
    return _numeric_matrix(columns, "classifier input")


def fit_transform_chain(steps: Sequence[TransformKind], train: Dataset) -> tuple[list[FittedTransform], np.ndarray]:
    """Fit each step on the output of the previous one, using only ``train``."""
    columns = list(train.columns)
    fitted: list[FittedTransform] = []
    for step in steps:
        f = _fit_step(step, columns)
        columns = f.apply(columns)
        fitted.append(f)
    return fitted, _final_matrix(columns)


def apply_chain(fitted: Sequence[FittedTransform], data: Dataset) -> np.ndarray:
    columns = list(data.columns)
    if fitted:
        names = {n for n, _ in fitted[0].input_layout}
        for c in columns:
            if c.name not in names:
                raise UnknownColumn(f"column {c.name!r} was not seen at fit time")
    for f in fitted:
        columns = f.apply(columns)
    return _final_matrix(columns)
