"""Exception taxonomy shared by the library and the command line tool.

The command line tool maps these onto process exit codes: configuration and
validation problems exit with 2, numerical degeneracies with 3, and file
problems with 4.
"""


class OrdanovaError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OrdanovaError, ValueError):
    """An argument or data structure violates a documented invariant."""


class SchemaError(ValidationError):
    """A file or dataset does not match any supported schema."""


class ConstraintError(ValidationError):
    """A constraint string cannot be parsed or is inconsistent."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class CsvError(OrdanovaError, ValueError):
    """A CSV file is unreadable or contains malformed values."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DegenerateEstimateError(OrdanovaError, RuntimeError):
    """A Monte Carlo estimate collapsed (for example, every draw violated
    the constraint of interest) and no finite answer can be reported."""


class NonConvergenceError(OrdanovaError, RuntimeError):
    """An iterative fit hit its iteration cap before meeting tolerance.

    The last iterate is attached so callers can inspect how far the fit got.
    """

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NumericError(OrdanovaError, RuntimeError):
    """A deterministic numerical operation failed (for example, a
    covariance matrix was not positive definite even after jitter)."""
