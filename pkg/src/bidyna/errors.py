"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class LayoutError(ValidationError):
    """Malformed maze layout. Carries the offending grid position when known."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row})" if col is None else f" (row {row}, col {col})"
        super().__init__(message + loc)
        self.row = row
        self.col = col


class DegenerateDistributionError(ValidationError):
    """A probability vector that must be strictly positive has a zero entry."""


class NumericalError(RuntimeError):
    """A solver failed to reach its accuracy target. Carries the residual."""

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (residual={residual:.3e})"
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """Invalid experiment configuration."""
