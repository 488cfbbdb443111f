"""Exception hierarchy.

Every error carries a stable ``code`` (its class name) and the process exit
code the CLI should use: 1 for usage/configuration problems, 2 for bad input
data, 3 for numerical failures.
"""

from __future__ import annotations


class SurvError(Exception):
    """Base class for all errors raised by survnet."""

    exit_code = 3

    def __init__(self, message: str = "", **context):
        super().__init__(message or self.__class__.__name__)
        self.context = context

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        out.update({k: v for k, v in self.context.items() if v is not None})
        return out


class UsageError(SurvError, ValueError):
    exit_code = 1


class DataError(SurvError, ValueError):
    exit_code = 2


class NumericError(SurvError, ArithmeticError):
    exit_code = 3


# usage / configuration
class BadArchitecture(UsageError):
    pass


class BadConfig(UsageError):
    pass


class ArchLossMismatch(UsageError):
    pass


class BrierWithCoxModel(UsageError):
    pass


# input data
class ValidationError(DataError):
    """Dataset invariant violation; ``row`` and ``rule`` locate the failure."""

    def __init__(self, message: str = "", row: int | None = None, **context):
        super().__init__(message, row=row, rule=type(self).__name__, **context)
        self.row = row
        self.rule = type(self).__name__


class NonPositiveTime(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class MissingColumn(DataError):
    pass


class ParseError(DataError):
    pass


class UnpairedInputs(DataError):
    pass


class CheckpointError(DataError):
    pass


# numerics
class ShapeMismatch(NumericError, ValueError):
    pass


class DomainError(NumericError):
    pass


class NonScalarOutput(NumericError):
    pass


class NoEvents(NumericError):
    pass


class NoCases(NumericError):
    pass


class NoControls(NumericError):
    pass


class NoComparablePairs(NumericError):
    pass


class DegenerateCensoring(NumericError):
    pass


class MissingVariance(NumericError):
    pass


class ZeroVariance(NumericError):
    pass


class TooFewTimes(NumericError):
    pass
