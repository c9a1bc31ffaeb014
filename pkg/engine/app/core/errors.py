"""Structured exception classes with error codes and suggestions.

Every failure raised by the library derives from :class:`ModelConfError`, which
carries a human-readable message, a stable error code for programmatic
handling, a details dict with the offending values and an optional suggestion.

Soft conditions that still produce a usable result (a Cox sweep that never gets
small enough, a lasso path that is exhausted, a coordinate descent that hits
``max_iter``) are reported as flags on the returned objects instead.

Example:
    try:
        fit = ols_fit(design, y)
    except SingularDesignError as e:
        logger.warning("fit.singular", extra={"code": e.error_code, **e.details})
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class ModelConfError(Exception):
    """Base exception for all library errors.

    Attributes:
        message (str): Human-readable error message.
        error_code (str): Unique error identifier for programmatic handling.
        details (dict): Additional context about the error.
        suggestion (str): Hint for resolving the error.
    """

    default_code = "MC_000"

    def __init__(
        self,
        message: str,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
        suggestion: Optional[str] = None,
    ) -> None:
        self.message = message
        self.error_code = error_code or self.default_code
        self.details = details or {}
        self.suggestion = suggestion
        super().__init__(self.message)

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}("
            f"message={self.message!r}, "
            f"error_code={self.error_code!r}, "
            f"details={self.details!r}, "
            f"suggestion={self.suggestion!r})"
        )


class DomainError(ModelConfError, ValueError):
    """Raised when an argument lies outside its mathematical domain."""

    default_code = "MC_DOM"


class DimensionMismatchError(ModelConfError, ValueError):
    """Raised when array shapes do not conform."""

    default_code = "MC_DIM"


class SingularDesignError(ModelConfError):
    """Raised when a design is rank deficient beyond the working tolerance.

    Also raised when a design has no more rows than columns.
    """

    default_code = "MC_SING"


class NotNestedError(ModelConfError):
    """Raised when a submodel is not contained in the model it is tested against."""

    default_code = "MC_NEST"


class DegenerateDfError(ModelConfError):
    """Raised when an F comparison has zero numerator or denominator df."""

    default_code = "MC_DF"


class NumericalError(ModelConfError):
    """Internal consistency failure of a numerical recursion."""

    default_code = "MC_NUM"


class DegenerateProjectionError(ModelConfError):
    """Raised when a projected replicate has (numerically) zero length."""

    default_code = "MC_PROJ"


class InsufficientDataError(ModelConfError):
    """Raised when there are too few observations for the requested fit."""

    default_code = "MC_DATA"


class ScreenerFailureError(ModelConfError):
    """Raised when a screening procedure used inside variance estimation fails."""

    default_code = "MC_SCREEN"


class SeparationError(ModelConfError):
    """Raised when a logistic fit is not estimable (all-0 or all-1 outcomes)."""

    default_code = "MC_SEP"


class ConfigError(ModelConfError):
    """Raised for unknown keys or out-of-domain values in a config file."""

    default_code = "MC_CFG"


class InputFormatError(ModelConfError):
    """Raised for malformed CSV input or results files."""

    default_code = "MC_INPUT"


__all__ = [
    "ConfigError",
    "DegenerateDfError",
    "DegenerateProjectionError",
    "DimensionMismatchError",
    "DomainError",
    "InputFormatError",
    "InsufficientDataError",
    "ModelConfError",
    "NotNestedError",
    "NumericalError",
    "ScreenerFailureError",
    "SeparationError",
    "SingularDesignError",
]
