"""Ensemble selection over a fixed pipeline portfolio.

The procedure fits every portfolio pipeline on a training partition, ranks
them by validation score, builds a size-``B`` ensemble greedily (with
replacement, uniform weights, probabilities averaged) and finally refits
each distinct member once on training plus validation data.

An optional economy pass first drops pipelines that cannot be fitted and
scored on a small stratified subsample within a per-pipeline time budget.
"""

from __future__ import annotations

import csv
import logging
import multiprocessing as mp
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .dataset import Dataset, concat, stratified_holdout, stratified_split, subsample
from .errors import (
    AllPipelinesFailed,
    AllPipelinesFiltered,
    AutoEnError,
    ClassTooSmall,
    EmptyCandidateSet,
    InvalidArgument,
    ShapeMismatch,
)
from .metrics import default_metric, is_better, score
from .pipeline import FitPartition, FittedPipeline, Portfolio, PipelineSpec, fit_pipeline

log = logging.getLogger(__name__)

Clock = Callable[[], float]
Observer = Callable[[str, Mapping[str, Any]], None]


@dataclass(frozen=True)
class EconomyConfig:
    sample_fraction: float = 0.10
    per_pipeline_budget: float = 36.0
    # split of the subsample into reduced train / validation parts
    inner_fractions: tuple[float, float] = (0.75, 0.25)

    def __post_init__(self):
        if not 0 < self.sample_fraction <= 1:
            raise InvalidArgument("economy sample_fraction must lie in (0, 1]")
        if not self.per_pipeline_budget > 0:
            raise InvalidArgument("economy per_pipeline_budget must be > 0")


@dataclass(frozen=True)
class AutoEnConfig:
    """Settings of one AutoEn run.

    ``metric`` is ``"auto"`` (roc_auc for two classes, log_loss otherwise),
    ``"roc_auc"`` or ``"log_loss"``. ``best_prefix_mode`` returns the best
    scoring prefix of the greedy sequence instead of all ``ensemble_size``
    picks.
    """

    ensemble_size: int = 50
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    economy: EconomyConfig | None = None
    metric: str = "auto"
    seed: int = 0
    best_prefix_mode: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.ensemble_size) < 1:
            raise InvalidArgument("ensemble_size must be >= 1")
        if self.metric not in ("auto", "roc_auc", "log_loss"):
            raise InvalidArgument(f"unknown metric {self.metric!r}")
        if len(self.fractions) != 3:
            raise InvalidArgument("fractions must give train, validation and test shares")

    def resolve_metric(self, n_classes: int) -> str:
        metric = default_metric(n_classes) if self.metric == "auto" else self.metric
        if metric == "roc_auc" and n_classes != 2:
            raise InvalidArgument("roc_auc selection needs a binary task")
        return metric


@dataclass(frozen=True)
class RankedPipeline:
    spec_id: int
    validation_score: float
    rank: int


@dataclass(frozen=True)
class TraceStep:
    step: int
    spec_id: int
    validation_score: float
    elapsed: float = 0.0


@dataclass
class Ranking:
    """Result of scoring a portfolio on a validation set."""

    ranked: list[RankedPipeline]
    valid_probs: dict[int, np.ndarray]
    failures: dict[int, str] = field(default_factory=dict)
    fit_seconds: dict[int, float] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.ranked)

    def __len__(self):
        return len(self.ranked)

    def __getitem__(self, i):
        return self.ranked[i]


@dataclass
class EnsembleModel:
    members: list[int]                           # greedy picks in order; the multiset of members
    unique_fitted: dict[int, FittedPipeline]
    trace: list[TraceStep]
    class_names: list[str]
    metric: str
    ranking: list[RankedPipeline] = field(default_factory=list)
    failures: dict[int, str] = field(default_factory=dict)
    candidate_ids: list[int] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    holdout_test_score: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def multiplicities(self) -> dict[int, int]:
        return dict(sorted(Counter(self.members).items()))

    @property
    def input_layout(self):
        return next(iter(self.unique_fitted.values())).input_layout

    def predict_proba(self, d: Dataset) -> np.ndarray:
        return ensemble_predict(self, d)


# ---------------------------------------------------------------- ranking


def _evaluate(spec: PipelineSpec, train: Dataset, valid: Dataset, metric: str, seed: int,
              clock: Clock = time.perf_counter):
    """Fit on ``train``, score on ``valid``. Returns (id, probs, score, error, seconds)."""
    start = clock()
    try:
        with threadpool_limits(1):
            fitted = fit_pipeline(spec, train, FitPartition.TRAIN_ONLY, seed)
            probs = fitted.predict_proba(valid)
            value = score(metric, probs, valid.labels)
        if not np.isfinite(value):
            raise AutoEnError(f"non-finite validation score {value}")
    except Exception as exc:  # a failing pipeline must never abort the run
        return spec.id, None, None, f"{type(exc).__name__}: {exc}", clock() - start
    return spec.id, probs, float(value), None, clock() - start


def _parallel(n_jobs: int):
    return Parallel(n_jobs=n_jobs, backend="loky" if n_jobs != 1 else "sequential")


def sort_ranking(scores: Mapping[int, float], metric: str) -> list[RankedPipeline]:
    """Best-first ordering; ties resolve to the lower spec id."""
    sign = -1.0 if is_better(metric, 1.0, 0.0) else 1.0
    order = sorted(scores, key=lambda i: (sign * scores[i], i))
    return [RankedPipeline(i, scores[i], r) for r, i in enumerate(order, start=1)]


def rank_pipelines(portfolio: Portfolio, train: Dataset, valid: Dataset, metric: str, seed: int = 0,
                   n_jobs: int = 1) -> Ranking:
    """Fit each pipeline on ``train`` only and rank by its score on ``valid``.

    Pipelines that raise are dropped and their error text is kept in
    ``Ranking.failures``. Validation probabilities are returned so that
    selection never refits anything.
    """
    if train.layout != valid.layout:
        raise ShapeMismatch("train and validation partitions have different columns")
    results = _parallel(n_jobs)(delayed(_evaluate)(spec, train, valid, metric, seed) for spec in portfolio)
    probs: dict[int, np.ndarray] = {}
    scores: dict[int, float] = {}
    failures: dict[int, str] = {}
    seconds: dict[int, float] = {}
    for spec_id, p, value, error, dt in results:
        seconds[spec_id] = dt
        if error is not None:
            failures[spec_id] = error
            log.warning("pipeline %s failed during ranking: %s", spec_id, error)
            continue
        probs[spec_id] = p
        scores[spec_id] = value
    if not scores:
        raise AllPipelinesFailed(f"all {len(portfolio)} pipelines failed: " +
                                 "; ".join(f"{i}: {e}" for i, e in failures.items()))
    return Ranking(sort_ranking(scores, metric), probs, failures, seconds)


# ---------------------------------------------------------------- greedy selection


def greedy_select(ranked: Sequence[RankedPipeline], valid_probs: Mapping[int, np.ndarray], valid_labels,
                  metric: str, ensemble_size: int, best_prefix_mode: bool = False,
                  clock: Clock | None = None) -> tuple[list[int], list[TraceStep]]:
    """Greedy forward selection with replacement.

    Step 1 takes the top-ranked pipeline. Step ``t`` appends the candidate
    whose addition gives the best score for the uniform average of the
    ``t`` chosen probability matrices; ties go to the lower spec id.

    Returns the chosen ids in pick order and one trace entry per step. With
    ``best_prefix_mode`` the returned ids are cut to the best-scoring
    prefix (the shortest one on ties); the trace always covers every step.
    """
    if not ranked or not valid_probs:
        raise EmptyCandidateSet("no candidate pipelines to select from")
    if int(ensemble_size) < 1:
        raise InvalidArgument("ensemble_size must be >= 1")
    candidates = sorted(r.spec_id for r in ranked if r.spec_id in valid_probs)
    if not candidates:
        raise EmptyCandidateSet("ranked pipelines have no validation probabilities")
    shapes = {valid_probs[c].shape for c in candidates}
    if len(shapes) != 1:
        raise ShapeMismatch(f"validation probability matrices differ in shape: {sorted(shapes)}")
    labels = np.asarray(valid_labels)
    start = clock() if clock else 0.0

    first = ranked[0].spec_id
    members = [first]
    running = valid_probs[first].copy()
    trace = [TraceStep(1, first, score(metric, running / 1, labels), (clock() - start) if clock else 0.0)]
    for t in range(2, int(ensemble_size) + 1):
        best_id, best_score = None, None
        for c in candidates:
            s = score(metric, (running + valid_probs[c]) / t, labels)
            if best_score is None or is_better(metric, s, best_score):
                best_id, best_score = c, s
        members.append(best_id)
        running = running + valid_probs[best_id]
        trace.append(TraceStep(t, best_id, best_score, (clock() - start) if clock else 0.0))

    if best_prefix_mode:
        best_len = 1
        for step in trace[1:]:
            if is_better(metric, step.validation_score, trace[best_len - 1].validation_score):
                best_len = step.step
        members = members[:best_len]
    return members, trace


# ---------------------------------------------------------------- economy filter


def _timed_child(conn, spec, train, valid, metric, seed):
    try:
        _, _, _, error, dt = _evaluate(spec, train, valid, metric, seed)
        conn.send((error, dt))
    finally:
        conn.close()


def _run_with_budget(spec: PipelineSpec, train: Dataset, valid: Dataset, metric: str, seed: int,
                     budget: float) -> tuple[str | None, float]:
    """Fit+score ``spec`` in a forked child, killing it once ``budget`` seconds pass.

    Returns (error or None, seconds). A timeout reports ``seconds = inf``.
    """
    if "fork" not in mp.get_all_start_methods():
        _, _, _, error, dt = _evaluate(spec, train, valid, metric, seed)
        return error, dt
    ctx = mp.get_context("fork")
    parent, child = ctx.Pipe(duplex=False)
    proc = ctx.Process(target=_timed_child, args=(child, spec, train, valid, metric, seed), daemon=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)  # fork with threads present
        proc.start()
    child.close()
    try:
        if parent.poll(budget):
            error, dt = parent.recv()
            return error, dt
        return None, float("inf")
    except EOFError:
        return "worker exited without a result", float("inf")
    finally:
        if proc.is_alive():
            proc.terminate()
        proc.join()
        parent.close()


@dataclass
class EconomyReport:
    kept: list[int]
    dropped: dict[int, str]
    seconds: dict[int, float]
    sample_rows: int


def economy_filter(portfolio: Portfolio, train: Dataset, cfg: AutoEnConfig,
                   report: list | None = None) -> Portfolio:
    """Keep the pipelines that fit and score on a stratified subsample within budget.

    The subsample (``sample_fraction`` of ``train``) is split into a reduced
    training and validation part. Surviving pipelines keep their original
    order. Raises ``AllPipelinesFiltered`` when nothing survives.
    """
    eco = cfg.economy or EconomyConfig()
    seed = cfg.seed
    sample = subsample(train, eco.sample_fraction, seed)
    try:
        inner_train, inner_valid = stratified_split(sample, eco.inner_fractions, seed)
        reduced_train, reduced_valid = sample.take(inner_train), sample.take(inner_valid)
    except ClassTooSmall:
        log.warning("economy subsample too small to split; fitting and scoring on the same %d rows",
                    sample.n_rows)
        reduced_train = reduced_valid = sample
    metric = cfg.resolve_metric(train.n_classes)
    if metric == "roc_auc" and len(np.unique(reduced_valid.labels)) < 2:
        metric = "log_loss"
    kept: list[int] = []
    dropped: dict[int, str] = {}
    seconds: dict[int, float] = {}
    for spec in portfolio:
        error, dt = _run_with_budget(spec, reduced_train, reduced_valid, metric, seed, eco.per_pipeline_budget)
        seconds[spec.id] = dt
        if error is not None:
            dropped[spec.id] = error
        elif dt > eco.per_pipeline_budget:
            dropped[spec.id] = f"exceeded the {eco.per_pipeline_budget:g} s budget"
        else:
            kept.append(spec.id)
    if report is not None:
        report.append(EconomyReport(kept, dropped, seconds, sample.n_rows))
    if not kept:
        raise AllPipelinesFiltered(f"economy filter removed all {len(portfolio)} pipelines")
    return portfolio.subset(kept)


# ---------------------------------------------------------------- end to end


def _refit(spec: PipelineSpec, data: Dataset, seed: int) -> FittedPipeline:
    with threadpool_limits(1):
        return fit_pipeline(spec, data, FitPartition.TRAIN_PLUS_VALIDATION, seed)


def autoen_fit(d: Dataset, portfolio: Portfolio, cfg: AutoEnConfig | None = None,
               split: tuple[Dataset, Dataset] | None = None, observer: Observer | None = None,
               clock: Clock = time.perf_counter) -> EnsembleModel:
    """Build an ensemble for ``d`` from ``portfolio``.

    Parameters
    ----------
    d : Dataset
        Labelled data. Ignored when ``split`` is given.
    split : (train, valid), optional
        Caller-supplied partitions; otherwise ``d`` is split by
        ``cfg.fractions`` and the held-out part is scored into
        ``holdout_test_score``.
    observer : callable, optional
        Called as ``observer(event, info)`` for ``"rank"``, ``"refit"`` and
        ``"economy"`` with the row ids each phase fits on.
    clock : callable
        Time source for the recorded timings.
    """
    cfg = cfg or AutoEnConfig()
    t0 = clock()
    timings: dict[str, float] = {}
    test = None
    if split is None:
        holdout = stratified_holdout(d, cfg.fractions, cfg.seed)
        train, valid, test = d.take(holdout.train_idx), d.take(holdout.valid_idx), d.take(holdout.test_idx)
    else:
        train, valid = split
    metric = cfg.resolve_metric(train.n_classes)

    candidates = portfolio
    if cfg.economy is not None:
        t = clock()
        if observer:
            observer("economy", {"row_ids": train.row_ids})
        try:
            candidates = economy_filter(portfolio, train, cfg)
        except AllPipelinesFiltered:
            warnings.warn("economy filter removed every pipeline; using the full portfolio", RuntimeWarning)
            candidates = portfolio
        timings["economy"] = clock() - t

    t = clock()
    if observer:
        observer("rank", {"row_ids": train.row_ids, "valid_row_ids": valid.row_ids})
    ranking = rank_pipelines(candidates, train, valid, metric, cfg.seed, cfg.n_jobs)
    timings["ranking"] = clock() - t

    t = clock()
    members, trace = greedy_select(ranking.ranked, ranking.valid_probs, valid.labels, metric,
                                   cfg.ensemble_size, cfg.best_prefix_mode, clock=clock)
    timings["selection"] = clock() - t

    t = clock()
    full = concat([train, valid])
    if observer:
        observer("refit", {"row_ids": full.row_ids})
    unique = sorted(set(members))
    fitted = _parallel(cfg.n_jobs)(delayed(_refit)(portfolio.get(i), full, cfg.seed) for i in unique)
    timings["refit"] = clock() - t

    model = EnsembleModel(members=members, unique_fitted=dict(zip(unique, fitted)), trace=trace,
                          class_names=list(train.class_names), metric=metric, ranking=ranking.ranked,
                          failures=ranking.failures, candidate_ids=candidates.ids, timings=timings)
    if test is not None and test.n_rows:
        try:
            model.holdout_test_score = score(metric, ensemble_predict(model, test), test.labels)
        except AutoEnError as exc:
            log.warning("could not score the held-out part: %s", exc)
    timings["total"] = clock() - t0
    return model


def ensemble_predict(m: EnsembleModel, d: Dataset) -> np.ndarray:
    """Multiplicity-weighted mean of the member probability matrices."""
    total = None
    for spec_id, count in m.multiplicities.items():
        P = m.unique_fitted[spec_id].predict_proba(d)
        total = count * P if total is None else total + count * P
    return total / m.size


def trace_rows(m: EnsembleModel) -> list[dict[str, Any]]:
    return [{"step": s.step, "spec_id": s.spec_id, "validation_score": s.validation_score,
             "elapsed_seconds": s.elapsed} for s in m.trace]


def export_trace_csv(m: EnsembleModel, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "spec_id", "validation_score", "elapsed_seconds"])
        for s in m.trace:
            w.writerow([s.step, s.spec_id, repr(s.validation_score), repr(s.elapsed)])
