"""Friedman test on average ranks with a Holm step-down post-hoc against a control."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateRanks, InvalidArgument
from .metrics import midranks


class Direction(str, Enum):
    HIGHER = "higher"
    LOWER = "lower"


@dataclass
class ScoreTable:
    """Scores of ``k`` methods on ``N`` datasets (``scores`` is k x N).

    Any non-empty table can be stored; ranking needs ``k >= 2`` and ``N >= 2``.
    """

    methods: list[str]
    datasets: list[str]
    scores: np.ndarray
    direction: Direction = Direction.HIGHER

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.direction = Direction(self.direction)
        k, N = len(self.methods), len(self.datasets)
        if self.scores.shape != (k, N):
            raise InvalidArgument(f"score matrix is {self.scores.shape}, expected {(k, N)}")
        if k < 1 or N < 1:
            raise InvalidArgument("score table is empty")
        if not np.all(np.isfinite(self.scores)):
            raise InvalidArgument("score table has missing or non-finite cells")
        if len(set(self.methods)) != k:
            raise InvalidArgument("method names must be unique")

    def drop(self, methods: Sequence[str]) -> "ScoreTable":
        keep = [i for i, m in enumerate(self.methods) if m not in set(methods)]
        return ScoreTable([self.methods[i] for i in keep], list(self.datasets), self.scores[keep], self.direction)

    @classmethod
    def read_csv(cls, path: str | Path, direction: Direction | str | None = None) -> "ScoreTable":
        """Read a dataset-per-row table (first column dataset name, one column per method).

        Lines starting with ``#`` are comments; a ``# direction=higher|lower``
        comment sets the direction unless one is passed explicitly.
        """
        text = Path(path).read_text(encoding="utf-8")
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "direction" and direction is None:
                    direction = value.strip()
                continue
            if line.strip():
                body.append(line)
        rows = list(csv.reader(io.StringIO("\n".join(body))))
        header, data = rows[0], rows[1:]
        methods = header[1:]
        datasets = [r[0] for r in data]
        try:
            scores = np.array([[float(v) for v in r[1:]] for r in data]).T
        except ValueError as exc:
            raise InvalidArgument(f"{path}: non-numeric score ({exc})") from None
        return cls(methods, datasets, scores.reshape(len(methods), len(datasets)),
                   Direction(direction or Direction.HIGHER))


@dataclass
class RankTable:
    methods: list[str]
    ranks: np.ndarray          # k x N, 1 = best
    average_ranks: np.ndarray  # k

    @property
    def k(self) -> int:
        return len(self.methods)

    @property
    def n_datasets(self) -> int:
        return self.ranks.shape[1]

    def order(self) -> list[str]:
        """Methods best-first; equal average ranks keep table order."""
        return [self.methods[i] for i in np.argsort(self.average_ranks, kind="stable")]


def average_ranks(t: ScoreTable) -> RankTable:
    if len(t.methods) < 2 or len(t.datasets) < 2:
        raise InvalidArgument("ranking needs at least 2 methods and 2 datasets")
    sign = -1.0 if t.direction is Direction.HIGHER else 1.0
    ranks = np.column_stack([midranks(sign * t.scores[:, j]) for j in range(t.scores.shape[1])])
    return RankTable(list(t.methods), ranks, ranks.mean(axis=1))


# ---------------------------------------------------------------- chi-square tail


def _gamma_series(a: float, x: float) -> float:
    """Regularised lower incomplete gamma P(a, x) by its power series (x < a + 1)."""
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_continued_fraction(a: float, x: float) -> float:
    """Regularised upper incomplete gamma Q(a, x) by Lentz's continued fraction (x >= a + 1)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    """Regularised upper incomplete gamma function Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise InvalidArgument("gamma_q needs a > 0")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_continued_fraction(a, x)


def chi2_sf(x: float, df: int) -> float:
    """Upper tail P(X >= x) of the chi-square distribution with ``df`` degrees of freedom."""
    return gamma_q(df / 2.0, x / 2.0)


def normal_two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


# ---------------------------------------------------------------- tests


def friedman_test(r: RankTable) -> tuple[float, float]:
    """Friedman chi-square statistic on average ranks and its upper-tail p-value.

    Raises
    ------
    DegenerateRanks
        When every dataset ties all methods, so there is nothing to test.
        The exception carries ``statistic = 0`` and ``p_value = 1``.
    """
    k, N = r.k, r.n_datasets
    if np.all(r.ranks == (k + 1) / 2.0):
        exc = DegenerateRanks("all methods tie on every dataset")
        exc.statistic, exc.p_value = 0.0, 1.0
        raise exc
    R = r.average_ranks
    stat = 12.0 * N / (k * (k + 1)) * (float(np.sum(R ** 2)) - k * (k + 1) ** 2 / 4.0)
    stat = max(stat, 0.0)
    return stat, chi2_sf(stat, k - 1)


@dataclass(frozen=True)
class Comparison:
    method: str
    average_rank: float
    z: float
    p_raw: float
    p_adjusted: float
    reject: bool


def holm_adjust(p: Sequence[float]) -> np.ndarray:
    """Holm step-down adjusted p-values, returned in the input order."""
    p = np.asarray(p, dtype=np.float64)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for j, i in enumerate(order):
        running = max(running, min(1.0, (m - j) * p[i]))
        adjusted[i] = running
    return adjusted


def holm_posthoc(r: RankTable, control: str | int, alpha: float = 0.05) -> list[Comparison]:
    """Compare every method against ``control`` on average ranks.

    Returns one entry per non-control method, in table order.
    """
    if isinstance(control, str):
        c = r.methods.index(control) if control in r.methods else -1
    else:
        c = int(control)
    if not 0 <= c < r.k:
        raise InvalidArgument(f"unknown control method {control!r}")
    k, N = r.k, r.n_datasets
    se = math.sqrt(k * (k + 1) / (6.0 * N))
    others = [i for i in range(k) if i != c]
    z = [(r.average_ranks[c] - r.average_ranks[i]) / se for i in others]
    p_raw = [normal_two_sided_p(v) for v in z]
    p_adj = holm_adjust(p_raw)
    return [Comparison(r.methods[i], float(r.average_ranks[i]), float(zi), float(pr), float(pa), bool(pa < alpha))
            for i, zi, pr, pa in zip(others, z, p_raw, p_adj)]


def format_report(t: ScoreTable, control: str | None = None, alpha: float = 0.05) -> str:
    """CSV report: average ranks best-first with Holm results against the control."""
    r = average_ranks(t)
    if control is None:
        control = r.order()[0]
    try:
        stat, p = friedman_test(r)
    except DegenerateRanks as exc:
        stat, p = exc.statistic, exc.p_value
    comps = {c.method: c for c in holm_posthoc(r, control, alpha)}
    out = io.StringIO()
    out.write(f"# friedman_statistic={stat!r}\n# friedman_p_value={p!r}\n# control={control}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["method", "average_rank", "z", "p_raw", "p_adjusted", "reject"])
    for m in r.order():
        i = r.methods.index(m)
        if m == control:
            w.writerow([m, repr(float(r.average_ranks[i])), "", "", "", ""])
        else:
            c = comps[m]
            w.writerow([m, repr(c.average_rank), repr(c.z), repr(c.p_raw), repr(c.p_adjusted), int(c.reject)])
    return out.getvalue()
