"""Exception types raised across the package.

Every error carries a stable ``code`` (its class name) so the command line
can print a machine-readable failure line.
"""

from __future__ import annotations


class AutoEnError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidArgument(AutoEnError, ValueError):
    pass


# dataset
class UnknownColumnKind(AutoEnError, ValueError):
    pass


class LabelColumnMissing(AutoEnError, ValueError):
    pass


class SingleClassDataset(AutoEnError, ValueError):
    pass


class RowLengthMismatch(AutoEnError, ValueError):
    pass


class NonNumericCellInNumericColumn(AutoEnError, ValueError):
    pass


class ClassTooSmall(AutoEnError, ValueError):
    def __init__(self, class_id: int, message: str | None = None):
        self.class_id = class_id
        super().__init__(message or f"class {class_id} is too small for the requested split")


class KTooLarge(InvalidArgument):
    pass


# preprocess
class ChainOrderInvalid(AutoEnError, ValueError):
    pass


class EmptyOutput(AutoEnError, ValueError):
    pass


class ArityMismatch(AutoEnError, ValueError):
    pass


class UnknownColumn(AutoEnError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


# learners
class DegenerateInput(AutoEnError, ValueError):
    pass


class NonFiniteFeature(AutoEnError, ValueError):
    pass


# pipeline
class UnknownStep(AutoEnError, ValueError):
    pass


class UnknownClassifier(AutoEnError, ValueError):
    pass


class DuplicateId(AutoEnError, ValueError):
    pass


class EmptyPortfolio(AutoEnError, ValueError):
    pass


class PipelineError(AutoEnError):
    """A preprocessing or learner failure, tagged with the pipeline id."""

    def __init__(self, spec_id: int, cause: BaseException):
        self.spec_id = spec_id
        self.cause = cause
        super().__init__(f"pipeline {spec_id}: {type(cause).__name__}: {cause}")


class PersistenceError(AutoEnError):
    pass


# ensemble
class AllPipelinesFailed(AutoEnError, RuntimeError):
    pass


class EmptyCandidateSet(AutoEnError, ValueError):
    pass


class AllPipelinesFiltered(AutoEnError, RuntimeError):
    pass


# metrics / stats
class SingleClassPresent(AutoEnError, ValueError):
    pass


class ShapeMismatch(AutoEnError, ValueError):
    pass


class DegenerateRanks(AutoEnError, ValueError):
    pass


# bench
class BenchmarkIncomplete(AutoEnError, RuntimeError):
    def __init__(self, gaps: list[tuple[str, str]]):
        self.gaps = gaps
        listed = ", ".join(f"{m}@{d}" for m, d in gaps)
        super().__init__(f"missing benchmark cells: {listed}")
