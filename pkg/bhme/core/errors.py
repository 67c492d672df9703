"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI reports for it.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from bhme.models.posterior import TrainingTrace

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class HmeError(Exception):
    """Base class for all errors raised by bhme."""

    kind = "error"
    exit_code = 1


class InvalidArgumentError(HmeError, ValueError):
    """An argument is outside its documented domain."""

    kind = "invalid-argument"
    exit_code = EXIT_USAGE


class StructuralError(HmeError, ValueError):
    """A tree or document does not have the required shape."""

    kind = "structural"
    exit_code = EXIT_DATA


class DataError(HmeError):
    """Input data is missing, malformed or unusable."""

    kind = "data"
    exit_code = EXIT_DATA


class NumericalError(HmeError, ArithmeticError):
    """A quantity became non-finite or a factorization failed.

    ``term`` names the offending quantity; ``trace`` is attached by the
    training loop so a restart harness can still inspect the failed run.
    """

    kind = "numerical"
    exit_code = EXIT_NUMERICAL

    def __init__(
        self,
        message: str,
        *,
        term: str | None = None,
        iteration: int | None = None,
        trace: TrainingTrace | None = None,
    ):
        super().__init__(message)
        self.term = term
        self.iteration = iteration
        self.trace = trace

    def __str__(self) -> str:
        parts = [super().__str__()]
        if self.term is not None:
            parts.append(f"term={self.term}")
        if self.iteration is not None:
            parts.append(f"iteration={self.iteration}")
        return " ".join(parts)


class SelectionError(HmeError):
    """No topology in a sweep produced a usable run."""

    kind = "selection"
    exit_code = EXIT_NUMERICAL
