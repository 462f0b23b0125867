"""Exception types shared across the package.

The CLI maps these onto exit codes, so every raised error should derive
from :class:`RieszWolffError`.
"""

from __future__ import annotations


class RieszWolffError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RieszWolffError, ValueError):
    """A precondition on an argument was violated."""


class SingularityError(RieszWolffError, ArithmeticError):
    """A kernel was evaluated exactly at an atom."""


class DivergenceError(RieszWolffError, ArithmeticError):
    """A scale integral is provably infinite for the requested window."""


class UndefinedFractionError(RieszWolffError, ZeroDivisionError):
    """A mass fraction was requested relative to a null ball."""


class ConstructionFailure(RieszWolffError):
    """The Cantor construction could not produce the next level."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InsufficientScalesError(ConstructionFailure):
    """An atom has no good scale below the admissible ceiling."""


class VerificationFailure(RieszWolffError, AssertionError):
    """A checked property of a computed object does not hold."""

    def __init__(self, message: str, **witness):
        super().__init__(message)
        self.witness = witness
