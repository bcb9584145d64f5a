"""k-fold benchmark campaigns over datasets, AutoEn variants and baselines.

Within each fold the held-out fold is the test set and the remaining rows
are split 75/25 (stratified) into training and validation parts. AutoEn
uses both parts as its train/validation partitions; baselines fit on their
union. Binary tasks are scored by ROC AUC, multi-class tasks by log-loss.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .dataset import Dataset, concat, load_csv, stratified_kfold, stratified_split
from .ensemble import AutoEnConfig, EconomyConfig, autoen_fit, ensemble_predict
from .errors import AutoEnError, BenchmarkIncomplete, InvalidArgument
from .learners import ClassifierSpec
from .metrics import default_metric, score
from .pipeline import FitPartition, PipelineSpec, Portfolio, default_portfolio, fit_pipeline, parse_portfolio
from .preprocess import ImputeMeanMode, OneHotEncode
from .stats import Direction, ScoreTable, format_report

log = logging.getLogger(__name__)

FIXTURE_ENV = "AUTOEN_FIXTURES"
PACKAGE_DATASETS = Path(__file__).parent / "fixtures" / "datasets"
METHOD_NAMES = ("AutoEn", "AutoEnEconomy", "ConstantPrior", "RandomForestUntuned", "RandomForestTuned")


def dataset_dirs() -> list[Path]:
    """Directories searched for ``<name>.csv`` / ``<name>.schema`` pairs.

    ``$AUTOEN_FIXTURES`` (an ``os.pathsep``-separated list) comes first,
    then the datasets bundled with the package.
    """
    dirs = [Path(p) for p in os.environ.get(FIXTURE_ENV, "").split(os.pathsep) if p]
    return dirs + [PACKAGE_DATASETS]


def find_dataset(name: str) -> tuple[Path, Path] | None:
    for base in dataset_dirs():
        csv_path, schema_path = base / f"{name}.csv", base / f"{name}.schema"
        if csv_path.is_file() and schema_path.is_file():
            return csv_path, schema_path
    return None


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class DatasetRef:
    name: str
    path: Path
    schema: Path

    def load(self) -> Dataset:
        d = load_csv(self.path, self.schema)
        d.name = self.name
        return d


@dataclass(frozen=True)
class MethodConfig:
    name: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise InvalidArgument(f"unknown benchmark method {self.name!r}; choose from {', '.join(METHOD_NAMES)}")


@dataclass
class BenchmarkConfig:
    datasets: list[DatasetRef]
    methods: list[MethodConfig]
    k: int = 10
    seed: int = 0
    output_dir: Path | None = None
    portfolio: Path | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if not self.datasets:
            raise InvalidArgument("benchmark needs at least one dataset")
        if not self.methods:
            raise InvalidArgument("benchmark needs at least one method")

    def load_portfolio(self) -> Portfolio:
        return parse_portfolio(self.portfolio) if self.portfolio else default_portfolio()

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], base_dir: Path | None = None) -> "BenchmarkConfig":
        """Build a config from parsed JSON.

        Datasets are either names resolved through :func:`find_dataset` or
        objects ``{"name", "path", "schema"}``; relative paths resolve
        against ``base_dir``. Methods are names or ``{"name": ..., params}``.
        """
        base = Path(base_dir or ".")

        def rel(p):
            return p if p is None else (base / p if not Path(p).is_absolute() else Path(p))

        datasets = []
        for entry in raw.get("datasets", []):
            if isinstance(entry, str):
                found = find_dataset(entry)
                if found is None:
                    searched = ", ".join(str(p) for p in dataset_dirs())
                    raise FileNotFoundError(f"dataset {entry!r} not found (searched {searched}; "
                                            f"set {FIXTURE_ENV} to add a directory)")
                datasets.append(DatasetRef(entry, *found))
            else:
                path = rel(entry["path"])
                schema = rel(entry.get("schema") or Path(path).with_suffix(".schema"))
                datasets.append(DatasetRef(entry.get("name") or Path(path).stem, Path(path), Path(schema)))
        methods = []
        for entry in raw.get("methods", list(METHOD_NAMES)):
            if isinstance(entry, str):
                methods.append(MethodConfig(entry))
            else:
                params = {k: v for k, v in entry.items() if k != "name"}
                methods.append(MethodConfig(entry["name"], params))
        return cls(datasets=datasets, methods=methods, k=int(raw.get("k", 10)), seed=int(raw.get("seed", 0)),
                   output_dir=rel(raw.get("output_dir")), portfolio=rel(raw.get("portfolio")),
                   n_jobs=int(raw.get("n_jobs", 1)))

    @classmethod
    def read(cls, path: str | Path) -> "BenchmarkConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)


# ---------------------------------------------------------------- baselines


class ConstantPrior:
    """Predicts the training class frequencies for every row."""

    def __init__(self, train: Dataset):
        if train.n_rows == 0:
            raise InvalidArgument("constant prior needs at least one training row")
        self.prior = train.class_counts() / train.n_rows

    def predict_proba(self, d: Dataset) -> np.ndarray:
        return np.tile(self.prior, (d.n_rows, 1))


def constant_prior_fit(train: Dataset) -> ConstantPrior:
    return ConstantPrior(train)


def random_forest_spec(tuned: bool, params: Mapping[str, Any], seed: int) -> PipelineSpec:
    """Impute + one-hot followed by a forest; the tuned variant defaults to 200 trees."""
    rf_params = dict(params)
    if tuned:
        rf_params.setdefault("n_trees", 200)
    rf_params.setdefault("seed", seed)
    name = "RandomForestTuned" if tuned else "RandomForestUntuned"
    return PipelineSpec(0, name, (ImputeMeanMode(), OneHotEncode()), ClassifierSpec("random_forest", rf_params))


# ---------------------------------------------------------------- running


@dataclass(frozen=True)
class FoldResult:
    dataset: str
    method: str
    fold: int
    metric: str
    score: float | None
    n_test: int
    wall_seconds: float
    error: str | None = None


class LeakageError(AutoEnError):
    pass


Observer = Callable[[str, Mapping[str, Any]], None]


def _leak_guard(test_ids: np.ndarray, context: dict[str, Any], observer: Observer | None):
    test = set(test_ids.tolist())

    def check(event: str, info: Mapping[str, Any]) -> None:
        for key in ("row_ids", "valid_row_ids"):
            if key in info and test.intersection(np.asarray(info[key]).tolist()):
                raise LeakageError(f"{context['method']} fold {context['fold']}: test rows used in {event}")
        if observer:
            observer(event, {**context, **info})

    return check


def _run_method(method: MethodConfig, train: Dataset, valid: Dataset, test: Dataset, portfolio: Portfolio,
                seed: int, n_jobs: int, guard: Observer, metric: str) -> np.ndarray:
    if method.name in ("AutoEn", "AutoEnEconomy"):
        params = dict(method.params)
        economy = None
        if method.name == "AutoEnEconomy":
            economy = EconomyConfig(**{k: params.pop(k) for k in ("sample_fraction", "per_pipeline_budget")
                                       if k in params})
        cfg = AutoEnConfig(seed=seed, n_jobs=n_jobs, economy=economy, metric=params.pop("metric", metric),
                           **params)
        model = autoen_fit(train, portfolio, cfg, split=(train, valid), observer=guard)
        return ensemble_predict(model, test)
    full = concat([train, valid])
    guard("fit", {"row_ids": full.row_ids})
    if method.name == "ConstantPrior":
        return constant_prior_fit(full).predict_proba(test)
    spec = random_forest_spec(method.name == "RandomForestTuned", method.params, seed)
    return fit_pipeline(spec, full, FitPartition.TRAIN_PLUS_VALIDATION, seed).predict_proba(test)


def run_benchmark(cfg: BenchmarkConfig, clock: Callable[[], float] = time.perf_counter,
                  observer: Observer | None = None) -> tuple[list[FoldResult], dict[str, ScoreTable]]:
    """Run every (dataset, method, fold) cell.

    ``wall_seconds`` of a cell spans the fold's train/validation split up to
    the test-set prediction. Failed cells are kept with ``score=None``; the
    caller decides (see :func:`require_complete`). Returns the fold results
    and one mean-score table per metric.
    """
    portfolio = cfg.load_portfolio()
    results: list[FoldResult] = []
    for ref in cfg.datasets:
        d = ref.load()
        metric = default_metric(d.n_classes)
        plan = stratified_kfold(d, cfg.k, cfg.seed)
        for i in range(cfg.k):
            rest_idx, test_idx = plan.split(i)
            rest, test = d.take(rest_idx), d.take(test_idx)
            fold_seed = cfg.seed + i
            for method in cfg.methods:
                context = {"dataset": ref.name, "method": method.name, "fold": i}
                guard = _leak_guard(test.row_ids, context, observer)
                start = clock()
                try:
                    tr_idx, va_idx = stratified_split(rest, (0.75, 0.25), fold_seed)
                    train, valid = rest.take(tr_idx), rest.take(va_idx)
                    probs = _run_method(method, train, valid, test, portfolio, fold_seed, cfg.n_jobs, guard, metric)
                    elapsed = clock() - start
                    value, error = score(metric, probs, test.labels), None
                except LeakageError:
                    raise
                except Exception as exc:
                    elapsed = clock() - start
                    value, error = None, f"{type(exc).__name__}: {exc}"
                    log.error("%s / %s / fold %d failed: %s", ref.name, method.name, i, error)
                results.append(FoldResult(ref.name, method.name, i, metric, value, test.n_rows, elapsed, error))
                log.info("%s %s fold %d: %s=%s (%.1fs)", ref.name, method.name, i, metric, value, elapsed)
    return results, mean_tables(results)


def missing_cells(results: list[FoldResult]) -> list[tuple[str, str]]:
    """(method, dataset) pairs with at least one failed fold."""
    gaps = sorted({(r.method, r.dataset) for r in results if r.score is None})
    return gaps


def require_complete(results: list[FoldResult]) -> None:
    gaps = missing_cells(results)
    if gaps:
        raise BenchmarkIncomplete(gaps)


def mean_tables(results: list[FoldResult]) -> dict[str, ScoreTable]:
    """Mean score per (method, dataset), one table per metric.

    Methods with a failed fold on any dataset of a metric group are left out
    of that group's table.
    """
    by_metric: dict[str, dict[tuple[str, str], list[float | None]]] = defaultdict(lambda: defaultdict(list))
    methods_order: list[str] = []
    for r in results:
        by_metric[r.metric][(r.method, r.dataset)].append(r.score)
        if r.method not in methods_order:
            methods_order.append(r.method)
    tables = {}
    for metric, cells in by_metric.items():
        datasets = list(dict.fromkeys(d for _, d in cells))
        methods = [m for m in methods_order
                   if all((m, d) in cells and None not in cells[(m, d)] for d in datasets)]
        if not methods:
            continue
        scores = np.array([[float(np.mean(cells[(m, d)])) for d in datasets] for m in methods])
        direction = Direction.HIGHER if metric in ("roc_auc", "accuracy") else Direction.LOWER
        tables[metric] = ScoreTable(methods, datasets, scores, direction)
    return tables


# ---------------------------------------------------------------- reports


def write_score_table(t: ScoreTable, path: Path) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# direction={t.direction.value}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", *t.methods])
        for j, d in enumerate(t.datasets):
            w.writerow([d, *(repr(float(v)) for v in t.scores[:, j])])


def emit_reports(results: list[FoldResult], tables: Mapping[str, ScoreTable], output_dir: str | Path,
                 control: str | None = "AutoEn") -> list[Path]:
    """Write fold, mean-score, rank and timing CSVs; returns the written paths.

    Everything except ``timing.csv`` depends only on the scores, so reruns
    with the same seed reproduce those files byte for byte.
    """
    if not results:
        raise InvalidArgument("no benchmark results to report")
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    written = []

    path = out / "folds.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", "method", "fold", "metric", "score", "n_test", "error"])
        for r in results:
            w.writerow([r.dataset, r.method, r.fold, r.metric, "" if r.score is None else repr(r.score),
                        r.n_test, r.error or ""])
    written.append(path)

    path = out / "timing.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", "method", "fold", "wall_seconds"])
        for r in results:
            w.writerow([r.dataset, r.method, r.fold, f"{r.wall_seconds:.6f}"])
    written.append(path)

    for metric, t in sorted(tables.items()):
        path = out / f"mean_scores_{metric}.csv"
        write_score_table(t, path)
        written.append(path)
        if len(t.methods) >= 2 and len(t.datasets) >= 2:
            ctl = control if control in t.methods else None
            path = out / f"ranks_{metric}.csv"
            path.write_text(format_report(t, ctl), encoding="utf-8")
            written.append(path)
    return written
