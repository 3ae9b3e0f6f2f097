"""
errors.py - exception hierarchy for the stochwave package.

Numerical failure inside a realization is reported through the solver
status, not through these exceptions; they cover invalid input, files
and whole-run failures.
"""

from __future__ import annotations


class StochwaveError(Exception):
    """Base class for all errors raised by stochwave."""


class GridError(StochwaveError, ValueError):
    """Invalid grid, operator parameters or off-grid queries."""


class NoiseConfigError(StochwaveError, ValueError):
    """Invalid noise model parameters."""


class ModelError(StochwaveError, ValueError):
    """Model parameters outside the documented range."""


class BorderedSystemError(StochwaveError):
    """The bordered (phase-condition) system is singular."""

    def __init__(self, message: str, pivot: float = float("nan")):
        super().__init__(message)
        self.pivot = pivot


class SolverStateError(StochwaveError):
    """A step was requested on a state that is no longer running."""


class EstimatorError(StochwaveError, ValueError):
    """Not enough data to form a speed estimate."""


class TemplateFitError(StochwaveError):
    """The template shift could not be determined."""


class NoRootInBracketError(TemplateFitError):
    """The phase residual has no sign change near the previous shift."""


class GridMismatchError(StochwaveError, ValueError):
    """Two results live on different grids."""


class AllRealizationsFailedError(StochwaveError):
    """No realization of an ensemble ran to the final time."""

    def __init__(self, message: str, blown_up: int, extinct: int):
        super().__init__(message)
        self.blown_up = blown_up
        self.extinct = extinct


class ConfigError(StochwaveError, ValueError):
    """A run-config file or value failed validation."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = ""
        if key is not None:
            where = f" [key {key}" + (f", line {line}]" if line is not None else "]")
        super().__init__(message + where)
        self.key = key
        self.line = line


class TrajectoryFileError(StochwaveError):
    """A trajectory or noise file could not be read."""


class TrajectoryVersionError(TrajectoryFileError):
    """The file was written by an incompatible format version."""


class TrajectoryCorruptError(TrajectoryFileError):
    """The file is truncated or otherwise damaged."""
