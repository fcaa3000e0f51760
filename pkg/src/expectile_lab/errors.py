"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for bad inputs
(CLI exit code 2) and :class:`NumericalError` for numerical failures on
otherwise valid inputs (CLI exit code 3).
"""


class ExpectileLabError(Exception):
    """Base class for all library errors."""


class ValidationError(ExpectileLabError, ValueError):
    """Input failed validation."""


class NumericalError(ExpectileLabError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class InvalidAlpha(ValidationError):
    pass


class InvalidTolerance(ValidationError):
    pass


class InvalidWeights(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class InvalidBlockLength(ValidationError):
    pass


class InvalidScheme(ValidationError):
    pass


class LagTooLarge(ValidationError):
    pass


class KTooLarge(ValidationError):
    pass


class TooFewReplicates(ValidationError):
    pass


class EmptyReplicates(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class OutsideParameterSpace(ValidationError):
    pass


class ColumnNotFound(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigError(ValidationError):
    pass


class BracketingFailure(NumericalError):
    pass


class NonIntegrable(NumericalError):
    pass


class DegenerateDraw(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class DegenerateGenerator(NumericalError):
    pass
