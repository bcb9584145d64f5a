from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from autoen.dataset import Column, Dataset, FeatureKind

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "autoen" / "fixtures"
TABLES = FIXTURES / "tables"
DATASETS = FIXTURES / "datasets"


def numeric_dataset(X, y, class_names=None, names=None) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    names = names or [f"x{j}" for j in range(X.shape[1])]
    class_names = class_names or [f"c{c}" for c in range(int(y.max()) + 1)]
    cols = [Column(n, FeatureKind.NUMERIC, X[:, j].copy()) for j, n in enumerate(names)]
    return Dataset(cols, y, list(class_names))


def mixed_dataset(n=120, n_classes=2, seed=0, missing=0.05) -> Dataset:
    """Numeric and categorical features with some missing cells and a learnable label."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % n_classes
    rng.shuffle(y)
    a = rng.normal(size=n) + y
    b = rng.normal(size=n) - 0.5 * y
    colors = np.array(["red", "green", "blue"], dtype=object)
    cat = colors[(y + rng.integers(0, 2, size=n)) % 3].astype(object)
    a[rng.random(n) < missing] = np.nan
    cat[rng.random(n) < missing] = None
    cols = [Column("a", FeatureKind.NUMERIC, a), Column("b", FeatureKind.NUMERIC, b),
            Column("color", FeatureKind.CATEGORICAL, cat)]
    return Dataset(cols, y, [f"k{c}" for c in range(n_classes)])


def blobs(n=90, n_classes=3, n_features=4, seed=0, spread=1.0) -> Dataset:
    rng = np.random.default_rng(seed)
    y = np.arange(n) % n_classes
    centers = rng.normal(scale=3.0, size=(n_classes, n_features))
    X = centers[y] + spread * rng.normal(size=(n, n_features))
    return numeric_dataset(X, y)


@pytest.fixture
def toy_mixed():
    return mixed_dataset()


@pytest.fixture
def toy_blobs():
    return blobs()


# ---------------------------------------------------------------- acceptance summary

_CRITERIA: dict[str, tuple[int, str]] = {}
_OUTCOMES: dict[str, str] = {}


def criterion(number: int, text: str):
    """Mark an acceptance test; a PASS/FAIL line per criterion is printed at the end of the run."""

    def mark(fn):
        fn._criterion = (number, text)
        return fn

    return mark


def pytest_collection_modifyitems(items):
    for item in items:
        info = getattr(getattr(item, "function", None), "_criterion", None)
        if info:
            _CRITERIA[item.nodeid] = info


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.nodeid in _CRITERIA and (report.when == "call" or report.failed):
        if report.failed or _OUTCOMES.get(item.nodeid) != "FAIL":
            _OUTCOMES[item.nodeid] = "FAIL" if report.failed else "SKIP" if report.skipped else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (number, text) in sorted(_CRITERIA.items(), key=lambda kv: kv[1][0]):
        if nodeid in _OUTCOMES:
            terminalreporter.write_line(f"{_OUTCOMES[nodeid]} criterion {number}: {text}")
