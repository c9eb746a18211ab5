"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: data problems exit 2, numeric
failures exit 3.
"""


class TFBoostError(Exception):
    """Base class for all package errors."""


class DataError(TFBoostError, ValueError):
    """Input data is malformed or inconsistent."""


class DimensionError(DataError):
    """Array shapes do not conform."""


class DomainError(DataError):
    """An argument lies outside the domain where the operation is defined."""


class ConstraintError(DomainError):
    """A parameter violates its box constraint."""


class RankError(DataError):
    """Requested rank exceeds what the data can support."""


class NumericalError(TFBoostError, ArithmeticError):
    """A numerical routine failed (non-finite values, indefinite matrices, ...)."""


class ModelFormatError(DataError):
    """A persisted model document could not be parsed."""


class UnsupportedVersionError(ModelFormatError):
    """A persisted model document carries an unknown format version."""
