"""Tabular classification datasets: loading, validation and stratified partitioning."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ClassTooSmall,
    InvalidArgument,
    KTooLarge,
    LabelColumnMissing,
    NonNumericCellInNumericColumn,
    RowLengthMismatch,
    SingleClassDataset,
    UnknownColumn,
    UnknownColumnKind,
)


class FeatureKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"

    @classmethod
    def parse(cls, text: str) -> "FeatureKind":
        key = text.strip().lower()
        aliases = {"numeric": cls.NUMERIC, "num": cls.NUMERIC, "real": cls.NUMERIC,
                   "categorical": cls.CATEGORICAL, "nominal": cls.CATEGORICAL, "cat": cls.CATEGORICAL}
        if key not in aliases:
            raise UnknownColumnKind(f"unknown column kind {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class Column:
    """One feature column.

    Numeric values are float64 with NaN marking a missing cell; categorical
    values are an object array of str with None marking a missing cell.
    """

    name: str
    kind: FeatureKind
    values: np.ndarray

    def missing_mask(self) -> np.ndarray:
        if self.kind is FeatureKind.NUMERIC:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)

    def take(self, idx: np.ndarray) -> "Column":
        return Column(self.name, self.kind, self.values[idx])


@dataclass
class Dataset:
    columns: list[Column]
    labels: np.ndarray | None
    class_names: list[str]
    row_ids: np.ndarray = None  # type: ignore[assignment]
    name: str = ""

    def __post_init__(self):
        n = self.n_rows
        if self.row_ids is None:
            self.row_ids = np.arange(n)
        for col in self.columns:
            if len(col.values) != n:
                raise RowLengthMismatch(f"column {col.name!r} has {len(col.values)} rows, expected {n}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != n:
                raise RowLengthMismatch("label vector length differs from column length")

    @property
    def n_rows(self) -> int:
        if self.columns:
            return len(self.columns[0].values)
        return 0 if self.labels is None else len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def layout(self) -> list[tuple[str, FeatureKind]]:
        return [(c.name, c.kind) for c in self.columns]

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise UnknownColumn(f"no column named {name!r}")

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def has_missing(self) -> bool:
        return any(col.missing_mask().any() for col in self.columns)

    def take(self, idx: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            columns=[c.take(idx) for c in self.columns],
            labels=None if self.labels is None else self.labels[idx],
            class_names=list(self.class_names),
            row_ids=self.row_ids[idx],
            name=self.name,
        )

    def without_labels(self) -> "Dataset":
        return replace(self, labels=None)

    def validate(self) -> None:
        """Check the labelled-dataset invariants, raising on the first violation."""
        if self.labels is None:
            raise LabelColumnMissing("dataset carries no labels")
        if self.n_classes < 2:
            raise SingleClassDataset(f"need at least 2 classes, got {self.n_classes}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise InvalidArgument("label outside [0, n_classes)")
        absent = np.flatnonzero(self.class_counts() == 0)
        if absent.size:
            names = [self.class_names[i] for i in absent]
            raise InvalidArgument(f"declared classes never observed: {names}")
        for col in self.columns:
            if col.kind is FeatureKind.NUMERIC:
                vals = col.values[~np.isnan(col.values)]
                if not np.all(np.isfinite(vals)):
                    raise NonNumericCellInNumericColumn(f"non-finite value in column {col.name!r}")


def concat(parts: Iterable[Dataset]) -> Dataset:
    parts = list(parts)
    first = parts[0]
    columns = [
        Column(c.name, c.kind, np.concatenate([p.columns[j].values for p in parts]))
        for j, c in enumerate(first.columns)
    ]
    labels = None if first.labels is None else np.concatenate([p.labels for p in parts])
    return Dataset(columns, labels, list(first.class_names),
                   np.concatenate([p.row_ids for p in parts]), first.name)


# ---------------------------------------------------------------- schema / CSV


@dataclass
class Schema:
    """Sidecar description of a CSV file.

    Text form is ``key=value`` lines::

        label=class
        categorical=color,shape
        missing=?
        class_names=good,bad
        kind.age=numeric

    Columns not named as categorical (or via ``kind.<col>``) are numeric.
    The empty string always counts as missing.
    """

    label: str
    categorical: tuple[str, ...] = ()
    missing: tuple[str, ...] = ()
    class_names: tuple[str, ...] | None = None
    kinds: dict[str, FeatureKind] = field(default_factory=dict)
    ignore: tuple[str, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "Schema":
        entries: dict[str, str] = {}
        kinds: dict[str, FeatureKind] = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidArgument(f"schema line without '=': {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key.startswith("kind."):
                kinds[key[5:]] = FeatureKind.parse(value)
            else:
                entries[key] = value
        if not entries.get("label"):
            raise LabelColumnMissing("schema does not declare label=<column>")

        def _list(key: str) -> tuple[str, ...]:
            value = entries.get(key, "")
            return tuple(s.strip() for s in value.split(",") if s.strip())

        class_names = _list("class_names") or None
        return cls(
            label=entries["label"],
            categorical=_list("categorical"),
            missing=_list("missing"),
            class_names=class_names,
            kinds=kinds,
            ignore=_list("ignore"),
        )

    @classmethod
    def read(cls, path: str | Path) -> "Schema":
        return cls.parse(Path(path).read_text())

    def to_text(self) -> str:
        lines = [f"label={self.label}"]
        if self.categorical:
            lines.append("categorical=" + ",".join(self.categorical))
        if self.missing:
            lines.append("missing=" + ",".join(self.missing))
        if self.class_names:
            lines.append("class_names=" + ",".join(self.class_names))
        if self.ignore:
            lines.append("ignore=" + ",".join(self.ignore))
        for name, kind in self.kinds.items():
            lines.append(f"kind.{name}={kind.value}")
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    def kind_of(self, column: str) -> FeatureKind:
        if column in self.kinds:
            return self.kinds[column]
        return FeatureKind.CATEGORICAL if column in self.categorical else FeatureKind.NUMERIC


def _as_schema(schema: Schema | str | Path) -> Schema:
    return schema if isinstance(schema, Schema) else Schema.read(schema)


def load_csv(path: str | Path, schema: Schema | str | Path, require_label: bool = True) -> Dataset:
    """Read a CSV file with a header row into a :class:`Dataset`.

    With ``require_label=False`` a file lacking the label column loads as an
    unlabelled dataset (used for prediction).
    """
    schema = _as_schema(schema)
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RowLengthMismatch(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(cell.strip() for cell in r)]
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise RowLengthMismatch(f"{path}:{lineno}: {len(r)} cells, header has {len(header)}")

    declared = set(schema.categorical) | set(schema.kinds) | set(schema.ignore)
    unknown = declared - set(header)
    if unknown:
        raise UnknownColumn(f"schema names columns absent from {path}: {sorted(unknown)}")
    has_label = schema.label in header
    if not has_label and require_label:
        raise LabelColumnMissing(f"label column {schema.label!r} not in {path}")

    missing_tokens = {""} | {m for m in schema.missing}

    def _missing(cell: str) -> bool:
        return cell.strip() in missing_tokens

    columns: list[Column] = []
    for j, name in enumerate(header):
        if name == schema.label or name in schema.ignore:
            continue
        kind = schema.kind_of(name)
        cells = [r[j] for r in body]
        if kind is FeatureKind.NUMERIC:
            values = np.empty(len(cells), dtype=np.float64)
            for i, cell in enumerate(cells):
                if _missing(cell):
                    values[i] = np.nan
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericCellInNumericColumn(
                        f"{path}:{i + 2}: column {name!r} holds non-numeric {cell!r}") from None
                if not math.isfinite(v):
                    raise NonNumericCellInNumericColumn(f"{path}:{i + 2}: column {name!r} holds {cell!r}")
                values[i] = v
        else:
            values = np.array([None if _missing(c) else c.strip() for c in cells], dtype=object)
        columns.append(Column(name, kind, values))

    labels = None
    if has_label:
        j = header.index(schema.label)
        raw_labels = [r[j].strip() for r in body]
        for i, lab in enumerate(raw_labels):
            if _missing(lab):
                raise LabelColumnMissing(f"{path}:{i + 2}: missing label")
        if schema.class_names:
            class_names = list(schema.class_names)
            undeclared = sorted(set(raw_labels) - set(class_names))
            if undeclared:
                raise InvalidArgument(f"labels not declared in class_names: {undeclared}")
        else:
            class_names = sorted(set(raw_labels))
    else:
        class_names = list(schema.class_names or ())
    if has_label:
        index = {c: i for i, c in enumerate(class_names)}
        labels = np.array([index[lab] for lab in raw_labels], dtype=np.int64)
        if len(class_names) < 2 or len(set(labels.tolist())) < 2:
            raise SingleClassDataset(f"{path}: need at least two classes")

    ds = Dataset(columns, labels, class_names, name=path.stem)
    if has_label:
        ds.validate()
    return ds


def load_features(path: str | Path, schema: Schema | str | Path) -> Dataset:
    """Load only the feature columns of ``path``; a label column, if present, is skipped."""
    schema = _as_schema(schema)
    with Path(path).open(newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    if schema.label in header:
        schema = replace(schema, label="\0label", ignore=tuple(schema.ignore) + (schema.label,))
    return load_csv(path, schema, require_label=False)


def _format_cell(col: Column, i: int) -> str:
    v = col.values[i]
    if col.kind is FeatureKind.NUMERIC:
        return "" if np.isnan(v) else repr(float(v))
    return "" if v is None else str(v)


def write_csv(d: Dataset, path: str | Path, schema_path: str | Path | None = None,
              label: str = "class") -> Schema:
    """Write ``d`` as CSV plus (optionally) its sidecar schema; ``load_csv`` reads it back."""
    header = [c.name for c in d.columns]
    if d.labels is not None:
        header.append(label)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(d.n_rows):
            row = [_format_cell(c, i) for c in d.columns]
            if d.labels is not None:
                row.append(d.class_names[d.labels[i]])
            w.writerow(row)
    schema = Schema(
        label=label,
        categorical=tuple(c.name for c in d.columns if c.kind is FeatureKind.CATEGORICAL),
        class_names=tuple(d.class_names),
    )
    if schema_path is not None:
        schema.write(schema_path)
    return schema


# ---------------------------------------------------------------- partitioning


@dataclass(frozen=True)
class HoldoutSplit:
    train_idx: np.ndarray
    valid_idx: np.ndarray
    test_idx: np.ndarray
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)

    @property
    def parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.train_idx, self.valid_idx, self.test_idx


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple[np.ndarray, ...]

    def split(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(rest_idx, test_idx)`` for fold ``i``."""
        rest = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return rest, self.folds[i]


def _largest_remainder(total: int, quotas: np.ndarray, tiebreak: np.ndarray | None = None) -> np.ndarray:
    """Integer allocation summing to ``total`` with each entry floor/ceil of its quota.

    Leftover units go to the largest fractional parts; ties go to the larger
    ``tiebreak`` value, then the lower index.
    """
    base = np.floor(quotas + 1e-12).astype(np.int64)
    left = total - int(base.sum())
    if left > 0:
        frac = quotas - base
        tb = np.zeros(len(quotas)) if tiebreak is None else np.asarray(tiebreak, dtype=float)
        order = sorted(range(len(quotas)), key=lambda i: (-round(frac[i], 12), -tb[i], i))
        for i in order[:left]:
            base[i] += 1
    return base


def _check_fractions(fractions: Sequence[float]) -> np.ndarray:
    fr = np.asarray(fractions, dtype=float)
    if fr.ndim != 1 or len(fr) < 2 or np.any(fr <= 0) or not math.isclose(fr.sum(), 1.0, abs_tol=1e-9):
        raise InvalidArgument(f"fractions must be positive and sum to 1, got {tuple(fractions)}")
    return fr


def stratified_split(d: Dataset, fractions: Sequence[float], seed: int) -> list[np.ndarray]:
    """Partition row positions into ``len(fractions)`` stratified parts.

    Every class places at least one member in every part.
    """
    fr = _check_fractions(fractions)
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[] for _ in fr]
    for c in range(d.n_classes):
        members = np.flatnonzero(d.labels == c)
        n_c = len(members)
        if n_c == 0:
            continue
        if n_c < len(fr):
            raise ClassTooSmall(c, f"class {c} ({d.class_names[c]!r}) has {n_c} members, "
                                   f"need >= {len(fr)} for a {len(fr)}-way split")
        counts = _largest_remainder(n_c, n_c * fr)
        while np.any(counts == 0):
            counts[int(np.argmax(counts))] -= 1
            counts[int(np.flatnonzero(counts == 0)[0])] += 1
        perm = rng.permutation(members)
        start = 0
        for p, cnt in enumerate(counts):
            parts[p].append(perm[start:start + cnt])
            start += cnt
    return [np.sort(np.concatenate(p)) if p else np.empty(0, dtype=np.int64) for p in parts]


def stratified_holdout(d: Dataset, fractions: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0) -> HoldoutSplit:
    if len(fractions) != 3:
        raise InvalidArgument("holdout needs three fractions (train, validation, test)")
    train, valid, test = stratified_split(d, fractions, seed)
    return HoldoutSplit(train, valid, test, tuple(float(f) for f in fractions))


def stratified_kfold(d: Dataset, k: int = 10, seed: int = 0) -> FoldPlan:
    if k < 2:
        raise InvalidArgument(f"k must be >= 2, got {k}")
    if k > d.n_rows:
        raise KTooLarge(f"k={k} exceeds the number of rows ({d.n_rows})")
    rng = np.random.default_rng(seed)
    counts = d.class_counts()
    small = [d.class_names[c] for c in range(d.n_classes) if 0 < counts[c] < k]
    if small:
        warnings.warn(f"classes with fewer than k={k} members are spread round-robin: {small}",
                      stacklevel=2)
    # class-ordered permuted sequence dealt round-robin keeps both per-class
    # and overall fold sizes within one of each other
    sequence = np.concatenate([rng.permutation(np.flatnonzero(d.labels == c)) for c in range(d.n_classes)])
    folds = tuple(np.sort(sequence[i::k]) for i in range(k))
    return FoldPlan(k, folds)


def subsample(d: Dataset, fraction: float, seed: int = 0) -> Dataset:
    """Stratified subsample of ``ceil(fraction * n_rows)`` rows, returned in shuffled order."""
    if not 0 < fraction <= 1:
        raise InvalidArgument(f"fraction must be in (0, 1], got {fraction}")
    n = d.n_rows
    m = math.ceil(fraction * n - 1e-9)
    counts = d.class_counts()
    take = _largest_remainder(m, m * counts / n, tiebreak=counts)
    rng = np.random.default_rng(seed)
    chosen = [rng.permutation(np.flatnonzero(d.labels == c))[:take[c]] for c in range(d.n_classes)]
    idx = rng.permutation(np.concatenate(chosen))
    return d.take(idx)
