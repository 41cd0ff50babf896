"""Exception hierarchy shared by every module.

The CLI maps :class:`InputError` to exit code 2 and :class:`NumericError`
(including :class:`FitError`) to exit code 3.
"""

from __future__ import annotations


class BirtCombineError(Exception):
    """Base class for all package errors."""


class InputError(BirtCombineError, ValueError):
    """Malformed or inconsistent user input."""


class StratificationError(InputError):
    """The gold labels cannot be stratified into folds."""


class UndefinedMetricError(BirtCombineError, ArithmeticError):
    """A metric has no defined value for the given data (e.g. constant input)."""


class NumericError(BirtCombineError, ArithmeticError):
    """A non-finite or out-of-domain value appeared during computation."""


class DomainError(NumericError, ValueError):
    """An argument lies outside the open interval the formula requires."""


class FitError(NumericError):
    """Parameter estimation diverged."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration
