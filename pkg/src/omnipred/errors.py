"""Exception types shared across the package.

The CLI maps these onto stable exit codes: validation problems exit with 3,
numeric failures with 4 (usage errors are handled by click and exit with 2).
"""


class OmnipredError(Exception):
    """Base class for all package errors."""


class ValidationError(OmnipredError, ValueError):
    """Malformed or out-of-range input data."""


class UnsupportedDimensionError(ValidationError):
    """Operation requires a covariate dimension it does not support."""


class UnseenCovariateError(OmnipredError, KeyError):
    """A lookup-backed predictor was queried at a covariate it has no entry for."""


class NumericError(OmnipredError, ArithmeticError):
    """An internal numeric invariant failed (e.g. a regret bound assertion)."""
