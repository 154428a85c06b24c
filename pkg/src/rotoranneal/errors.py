"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems -> 1,
integration failures -> 2, analysis input problems -> 3.
"""
from __future__ import annotations


class InvalidParameterError(ValueError):
    """A parameter violates a stated bound; the message names the bound."""


class UnsupportedConfigurationError(ValueError):
    """A closed-form path was requested for constants it does not cover."""


class IntegrationFailureError(RuntimeError):
    """Non-finite state during time evolution."""

    def __init__(self, message: str, step_index: int, site_index: int, seed: int | None = None):
        super().__init__(message)
        self.step_index = step_index
        self.site_index = site_index
        self.seed = seed


class InsufficientSamplesError(ValueError):
    """Too few samples for the requested estimator."""


class InsufficientDataError(ValueError):
    """Too few points for a fit, or the fit window is empty."""


class DegenerateRatioError(ValueError):
    """Cumulant ratio requested with a vanishing first cumulant."""


class InsufficientOverlapError(ValueError):
    """No pair of rescaled curves shares x support."""


class FormatVersionError(ValueError):
    """An input file declares an unknown or missing format version."""
