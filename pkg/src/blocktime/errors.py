"""Exception hierarchy shared across the package.

Callers can catch :class:`BlocktimeError` to handle anything raised here, or
the specific subclasses to distinguish bad arguments, numerical failures,
and data/transport problems.  The CLI maps these onto exit codes.
"""

from __future__ import annotations

__all__ = [
    "BlocktimeError",
    "DomainError",
    "QuadratureError",
    "FitError",
    "DegenerateHistogramError",
    "IngestError",
    "SchemaError",
    "FormatError",
    "TransportError",
    "ProtocolError",
    "IntegrityError",
]


class BlocktimeError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BlocktimeError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class QuadratureError(BlocktimeError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the best value obtained and the achieved error estimate so the
    caller can decide whether the partial result is still usable.
    """

    def __init__(self, message: str, value: float, error_estimate: float):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class FitError(BlocktimeError, RuntimeError):
    """Nonlinear fitting could not produce a usable parameter estimate."""


class DegenerateHistogramError(FitError):
    """The histogram has too few populated bins to constrain the model."""


class IngestError(BlocktimeError):
    """Base class for data-ingestion failures."""


class SchemaError(IngestError):
    """Input is missing required columns or fields."""


class FormatError(IngestError):
    """A value could not be parsed in the expected format.

    ``row_errors`` lists ``(row_number, message)`` pairs when the failure
    came from scanning tabular input.
    """

    def __init__(self, message: str, row_errors: list[tuple[int, str]] | None = None):
        super().__init__(message)
        self.row_errors = list(row_errors) if row_errors else []


class TransportError(IngestError):
    """A network request failed after exhausting retries."""


class ProtocolError(IngestError):
    """A remote response did not have the expected shape."""


class IntegrityError(IngestError):
    """Fetched or parsed data is internally inconsistent."""
