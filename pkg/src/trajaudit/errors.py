"""Exception hierarchy for the toolkit.

``ValidationError`` subclasses map to CLI exit code 2, ``RuntimeFailure``
subclasses to exit code 3; anything else bubbling out of the CLI is a
usage error (exit code 1).
"""


class TrajauditError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TrajauditError):
    """Bad input data or configuration (CLI exit code 2)."""


class ParseError(ValidationError):
    """Malformed input file; message names the offending line."""


class EmptyInputError(ValidationError):
    """An input that must be non-empty was empty."""


class SizeError(ValidationError):
    """Requested more items than available; message reports both counts."""


class ShapeError(ValidationError):
    """Array/vector dimension mismatch."""


class ConfigError(ValidationError):
    """Inconsistent or out-of-range configuration values."""


class RuntimeFailure(TrajauditError):
    """Failure during computation (CLI exit code 3)."""


class DivergenceError(RuntimeFailure):
    """Training produced a non-finite loss; message names the epoch."""


class NumericError(RuntimeFailure):
    """Non-finite values encountered where finite ones are required."""
