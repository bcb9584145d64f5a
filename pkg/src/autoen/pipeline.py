"""Pipelines (preprocessing chain + classifier) and the portfolio file format.

A portfolio file lists one pipeline per line::

    # comment
    <id> <name>: <step> -> <step>(<k>=<v>, ...) -> <classifier>(<k>=<v>, ...)

The last element of the chain is always the classifier. Values may be
integers, floats, ``none``, ``true``/``false`` or bare words (kept as
strings). Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

from .dataset import Dataset, FeatureKind
from .errors import (
    ArityMismatch,
    AutoEnError,
    DuplicateId,
    EmptyPortfolio,
    InvalidArgument,
    PipelineError,
    UnknownClassifier,
    UnknownColumn,
    UnknownStep,
)
from .learners import FAMILIES, Classifier, ClassifierSpec
from .preprocess import (
    FittedTransform,
    TransformKind,
    apply_chain,
    fit_transform_chain,
    make_step,
    step_params,
    STEP_TYPES,
)

DEFAULT_PORTFOLIO = Path(__file__).parent / "fixtures" / "default_portfolio.txt"


class FitPartition(str, Enum):
    TRAIN_ONLY = "train_only"
    TRAIN_PLUS_VALIDATION = "train_plus_validation"


@dataclass(frozen=True)
class PipelineSpec:
    id: int
    name: str
    steps: tuple[TransformKind, ...]
    classifier: ClassifierSpec

    def describe(self) -> str:
        parts = [_call(s.name, step_params(s)) for s in self.steps]
        parts.append(_call(self.classifier.family, self.classifier.params))
        return f"{self.id} {self.name}: " + " -> ".join(parts)

    def seeded(self, base_seed: int) -> ClassifierSpec:
        """Classifier spec with ``seed = base_seed XOR id`` unless the portfolio fixed one."""
        params = dict(self.classifier.params)
        family = FAMILIES[self.classifier.family]
        if "seed" in family.defaults and "seed" not in params:
            params["seed"] = int(base_seed) ^ int(self.id)
        return ClassifierSpec(self.classifier.family, params)


@dataclass(frozen=True)
class Portfolio:
    pipelines: tuple[PipelineSpec, ...]

    def __post_init__(self):
        if not self.pipelines:
            raise EmptyPortfolio("portfolio contains no pipelines")
        seen: set[int] = set()
        for p in self.pipelines:
            if p.id in seen:
                raise DuplicateId(f"pipeline id {p.id} appears more than once")
            seen.add(p.id)

    def __iter__(self) -> Iterator[PipelineSpec]:
        return iter(self.pipelines)

    def __len__(self) -> int:
        return len(self.pipelines)

    @property
    def ids(self) -> list[int]:
        return [p.id for p in self.pipelines]

    def get(self, spec_id: int) -> PipelineSpec:
        for p in self.pipelines:
            if p.id == spec_id:
                return p
        raise KeyError(spec_id)

    def subset(self, ids: Sequence[int]) -> "Portfolio":
        keep = set(ids)
        return Portfolio(tuple(p for p in self.pipelines if p.id in keep))

    def to_text(self) -> str:
        return "".join(p.describe() + "\n" for p in self.pipelines)


# ---------------------------------------------------------------- parsing

_LINE = re.compile(r"^\s*(-?\d+)\s+([^:]+?)\s*:\s*(.+?)\s*$")
_CALL = re.compile(r"^([A-Za-z_][\w]*)\s*(?:\((.*)\))?$")


def _call(name: str, params: dict[str, Any]) -> str:
    if not params:
        return name
    return f"{name}(" + ", ".join(f"{k}={_format_value(v)}" for k, v in params.items()) + ")"


def _format_value(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _parse_value(text: str) -> Any:
    t = text.strip()
    low = t.lower()
    if low == "none":
        return None
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def _parse_call(text: str, where: str) -> tuple[str, dict[str, Any]]:
    m = _CALL.match(text.strip())
    if not m:
        raise InvalidArgument(f"{where}: cannot parse {text.strip()!r}")
    name, args = m.group(1), m.group(2)
    params: dict[str, Any] = {}
    if args and args.strip():
        for item in args.split(","):
            if "=" not in item:
                raise InvalidArgument(f"{where}: expected key=value, got {item.strip()!r}")
            k, v = item.split("=", 1)
            params[k.strip()] = _parse_value(v)
    return name, params


def parse_portfolio_text(text: str, source: str = "<portfolio>") -> Portfolio:
    pipelines: list[PipelineSpec] = []
    seen: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        m = _LINE.match(line)
        if not m:
            raise InvalidArgument(f"{where}: expected '<id> <name>: step -> ... -> classifier'")
        spec_id, name, chain = int(m.group(1)), m.group(2), m.group(3)
        if spec_id in seen:
            raise DuplicateId(f"{where}: pipeline id {spec_id} appears more than once")
        seen.add(spec_id)
        calls = [_parse_call(part, where) for part in chain.split("->")]
        *step_calls, (family, clf_params) = calls
        steps = []
        for step_name, params in step_calls:
            if step_name not in STEP_TYPES:
                raise UnknownStep(f"{where}: unknown preprocessing step {step_name!r}")
            try:
                steps.append(make_step(step_name, **params))
            except AutoEnError as exc:
                raise type(exc)(f"{where}: {exc}") from None
        clf = ClassifierSpec(family, clf_params)
        clf.build()  # rejects unknown families and invalid hyperparameters early
        pipelines.append(PipelineSpec(spec_id, name, tuple(steps), clf))
    if not pipelines:
        raise EmptyPortfolio(f"{source}: no pipelines found")
    return Portfolio(tuple(pipelines))


def parse_portfolio(path: str | Path) -> Portfolio:
    path = Path(path)
    return parse_portfolio_text(path.read_text(encoding="utf-8"), source=str(path))


def default_portfolio() -> Portfolio:
    return parse_portfolio(DEFAULT_PORTFOLIO)


# ---------------------------------------------------------------- fitting


@dataclass
class FittedPipeline:
    spec: PipelineSpec
    fitted_steps: list[FittedTransform]
    model: Classifier
    tag: FitPartition
    input_layout: list[tuple[str, FeatureKind]]
    class_names: list[str] = field(default_factory=list)

    @property
    def spec_id(self) -> int:
        return self.spec.id

    def check_layout(self, d: Dataset) -> None:
        layout = d.layout
        if len(layout) != len(self.input_layout):
            raise ArityMismatch(f"pipeline {self.spec_id} expects {len(self.input_layout)} columns, "
                                f"got {len(layout)}")
        for (name, kind), (want, want_kind) in zip(layout, self.input_layout):
            if name != want:
                raise UnknownColumn(f"pipeline {self.spec_id}: column {name!r} where {want!r} was expected")
            if kind is not want_kind:
                raise ArityMismatch(f"pipeline {self.spec_id}: column {name!r} is {kind.value}, "
                                    f"expected {want_kind.value}")

    def transform(self, d: Dataset) -> np.ndarray:
        self.check_layout(d)
        return apply_chain(self.fitted_steps, d)

    def predict_proba(self, d: Dataset) -> np.ndarray:
        return self.model.predict_proba(self.transform(d))


def fit_pipeline(spec: PipelineSpec, train: Dataset, tag: FitPartition = FitPartition.TRAIN_ONLY,
                 seed: int = 0) -> FittedPipeline:
    """Fit the chain then the classifier on ``train``; errors carry the pipeline id."""
    if train.labels is None:
        raise InvalidArgument("fit_pipeline needs a labelled dataset")
    try:
        fitted, X = fit_transform_chain(spec.steps, train)
        model = spec.seeded(seed).build().fit(X, train.labels, train.n_classes)
    except AutoEnError as exc:
        raise PipelineError(spec.id, exc) from exc
    return FittedPipeline(spec, fitted, model, FitPartition(tag), list(train.layout), list(train.class_names))


def pipeline_predict_proba(p: FittedPipeline, d: Dataset) -> np.ndarray:
    return p.predict_proba(d)
