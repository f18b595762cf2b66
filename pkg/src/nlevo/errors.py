"""Shared exception types.

All library errors derive from :class:`NlevoError` so callers can catch
one base class at the CLI boundary.
"""

from __future__ import annotations


class NlevoError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NlevoError, ValueError):
    """A mathematical argument lies outside the supported domain."""


class UsageError(NlevoError, ValueError):
    """An API was called with structurally invalid inputs or configuration."""


class SolverError(NlevoError, RuntimeError):
    """An iterative solve failed to converge to the requested tolerance."""


class EvaluationError(NlevoError, RuntimeError):
    """A quadrature or series evaluation missed its accuracy target."""


class AccuracyWarning(UserWarning):
    """The result is outside the range where accuracy has been validated."""
