"""
wave_metrics.py - wave position, speed and width estimation.

Positions come from two sources:

  - level sets: interpolated points where the profile crosses a fixed
    value (a and b near the two rest states, c at the midpoint);
  - template fitting: the shift y at which the phase residual
    <u_hat_x(. - y), u - u_hat(. - y)> vanishes.

All functions take full-grid samples (Dirichlet boundary values included).
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from stochwave.errors import EstimatorError, NoRootInBracketError
from stochwave.grid_ops import Grid, full_grid_derivative

#####################################
# Defaults
#####################################

DEFAULT_LEVEL_OFFSET = 0.01
DEFAULT_WIDTH_DELTA = 0.05
DEFAULT_SCAN_CELLS = 8
DEFAULT_SCAN_EXPANSIONS = 4

#####################################
# Types
#####################################


class LevelConvention(str, Enum):
    """Which crossing counts as the level-set position.

    SUP_FROM_LEFT: the rightmost crossing (edge of the region next to the
    left rest state); used for a and c.
    SUP_FROM_RIGHT: the leftmost crossing; used for b.
    """

    SUP_FROM_LEFT = "sup_from_left"
    SUP_FROM_RIGHT = "sup_from_right"


class Estimator(str, Enum):
    LEVEL_SECANT = "level_secant"
    LEVEL_FIT = "level_fit"


@dataclass
class LevelSetTrack:
    """Time series of one level-set position; NaN where no crossing exists."""

    level: float
    convention: LevelConvention
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)

    def append(self, t: float, position: float | None) -> None:
        self.times.append(float(t))
        self.positions.append(math.nan if position is None else float(position))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.times, dtype=float), np.asarray(self.positions, dtype=float)


@dataclass(frozen=True)
class SpeedEstimate:
    estimator: Estimator
    value: float
    t0: float
    intercept: float | None = None
    variance: float | None = None


@dataclass(frozen=True)
class TemplateFit:
    shift: float
    residual: float
    multiple_roots: bool = False


@dataclass(frozen=True, eq=False)
class TemplateSpeeds:
    """Speeds derived from a shift series: per-step lambda, its time
    average after t0 and the OLS slope of the position."""

    lam: np.ndarray
    lambda_min: float
    lambda_gamma: float


#####################################
# Levels
#####################################


def level_values(rest_states: tuple[float, float], offset: float = DEFAULT_LEVEL_OFFSET) -> dict:
    """Levels a, b, c for rest states (u_-, u_+) at the left and right ends."""
    u_minus, u_plus = rest_states
    span = u_plus - u_minus
    return {
        "a": u_minus + offset * span,
        "b": u_plus - offset * span,
        "c": 0.5 * (u_minus + u_plus),
    }


def level_crossing(
    u: np.ndarray, grid: Grid, level: float, convention: LevelConvention | str
) -> float | None:
    """Interpolated crossing of `level`, or None if u never crosses it."""
    convention = LevelConvention(convention)
    d = np.asarray(u, dtype=float) - level
    x = grid.x
    strict = np.flatnonzero(d[:-1] * d[1:] < 0.0)
    exact = np.flatnonzero(d == 0.0)
    if strict.size == 0 and exact.size == 0:
        return None
    positions = x[strict] + d[strict] / (d[strict] - d[strict + 1]) * grid.dx
    positions = np.concatenate((positions, x[exact]))
    if convention is LevelConvention.SUP_FROM_LEFT:
        return float(positions.max())
    return float(positions.min())


def has_crossing(u: np.ndarray, level: float) -> bool:
    d = np.asarray(u, dtype=float) - level
    return bool(np.any(d[:-1] * d[1:] <= 0.0))


def wave_width(
    u: np.ndarray,
    grid: Grid,
    delta: float = DEFAULT_WIDTH_DELTA,
    rest_states: tuple[float, float] = (0.0, 1.0),
) -> float | None:
    """Distance between the delta and 1-delta level sets (a/b conventions)."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    levels = level_values(rest_states, delta)
    a = level_crossing(u, grid, levels["a"], LevelConvention.SUP_FROM_LEFT)
    b = level_crossing(u, grid, levels["b"], LevelConvention.SUP_FROM_RIGHT)
    if a is None or b is None:
        return None
    return max(b - a, 0.0)


#####################################
# Level-Set Speeds
#####################################


def _after(times: np.ndarray, t0: float) -> np.ndarray:
    return times >= t0 - 1e-9 * max(1.0, abs(t0))


def speed_secant(track: LevelSetTrack, t0: float) -> SpeedEstimate:
    """(z(t) - z(t0)) / (t - t0) with t the last sample."""
    times, positions = track.as_arrays()
    if times.size == 0:
        raise EstimatorError("empty level-set track")
    idx = np.flatnonzero(_after(times, t0))
    if idx.size < 2:
        raise EstimatorError(f"need two samples at or after t0={t0}")
    i0, i1 = idx[0], idx[-1]
    if not (math.isfinite(positions[i0]) and math.isfinite(positions[i1])):
        raise EstimatorError("level-set position missing at an end point")
    value = (positions[i1] - positions[i0]) / (times[i1] - times[i0])
    return SpeedEstimate(Estimator.LEVEL_SECANT, float(value), float(times[i0]))


def ols_fit(times: np.ndarray, positions: np.ndarray) -> tuple[float, float]:
    if times.size < 2 or np.ptp(times) == 0.0:
        raise EstimatorError("linear fit needs at least two distinct sample times")
    slope, intercept = np.polyfit(times, positions, 1)
    return float(slope), float(intercept)


def speed_linfit(track: LevelSetTrack, t0: float) -> SpeedEstimate:
    """OLS slope and intercept K of z(t) over t >= t0."""
    times, positions = track.as_arrays()
    keep = _after(times, t0) & np.isfinite(positions)
    slope, intercept = ols_fit(times[keep], positions[keep])
    return SpeedEstimate(Estimator.LEVEL_FIT, slope, float(t0), intercept=intercept)


#####################################
# Template Fitting
#####################################


def phase_residual(u: np.ndarray, grid: Grid, template: np.ndarray, shift: float,
                   template_derivative: np.ndarray | None = None) -> float:
    """<u_hat_x(. - y), u - u_hat(. - y)> with the template interpolated off-grid."""
    points = grid.x - shift
    if template_derivative is None:
        template_derivative = full_grid_derivative(grid, template)
    moved = grid.interpolate(template, points, clamp=True)
    moved_x = grid.interpolate(template_derivative, points, clamp=True)
    return grid.inner(moved_x, np.asarray(u) - moved)


def template_shift(
    u: np.ndarray,
    grid: Grid,
    template: np.ndarray,
    previous_shift: float = 0.0,
    *,
    scan_cells: int = DEFAULT_SCAN_CELLS,
    expansions: int = DEFAULT_SCAN_EXPANSIONS,
    template_derivative: np.ndarray | None = None,
) -> TemplateFit:
    """Shift y with <u_hat_x(. - y), u - u_hat(. - y)> = 0 near previous_shift.

    The residual is scanned on y_- + j*dx, |j| <= scan_cells, doubling the
    window up to `expansions` times until a sign change appears; the
    bracket nearest y_- is then refined with brentq.

    Raises:
        NoRootInBracketError: no sign change in the widest window.
    """
    if template_derivative is None:
        template_derivative = full_grid_derivative(grid, template)

    def residual(y: float) -> float:
        return phase_residual(u, grid, template, y, template_derivative)

    half = scan_cells
    for _ in range(expansions + 1):
        offsets = np.arange(-half, half + 1)
        ys = previous_shift + offsets * grid.dx
        values = np.array([residual(y) for y in ys])
        zeros = np.flatnonzero(values == 0.0)
        changes = np.flatnonzero(values[:-1] * values[1:] < 0.0)
        if zeros.size or changes.size:
            break
        half *= 2
    else:
        raise NoRootInBracketError(
            f"no root of the phase residual within {half // 2} cells of y={previous_shift:.6g}"
        )

    candidates = [(abs(ys[i] - previous_shift), ys[i], ys[i]) for i in zeros]
    candidates += [(abs(0.5 * (ys[i] + ys[i + 1]) - previous_shift), ys[i], ys[i + 1]) for i in changes]
    candidates.sort(key=lambda c: c[0])
    _, lo, hi = candidates[0]
    root = lo if lo == hi else brentq(residual, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    return TemplateFit(float(root), residual(root), multiple_roots=len(candidates) > 1)


def template_speed_series(times, shifts, t0: float) -> TemplateSpeeds:
    """lambda^n = (y^n - y^{n-1}) / dt, its time average on [t0, t] and
    the OLS slope of (t, y) on the same window."""
    times = np.asarray(times, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    if times.size < 2:
        raise EstimatorError("need at least two shifts")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise EstimatorError("template speeds need a uniform time grid")
    lam = np.diff(shifts) / steps
    window = _after(times[:-1], t0) & np.isfinite(lam)
    if not np.any(window):
        raise EstimatorError(f"no speed samples after t0={t0}")
    keep = _after(times, t0) & np.isfinite(shifts)
    slope, _ = ols_fit(times[keep], shifts[keep])
    return TemplateSpeeds(lam, float(np.mean(lam[window])), slope)


def time_average(times, lam, t0: float) -> float:
    """Mean of a per-step speed series over steps starting at or after t0.

    lam[n] is the speed used over [t_n, t_{n+1}].
    """
    times = np.asarray(times, dtype=float)
    lam = np.asarray(lam, dtype=float)
    window = _after(times[: lam.size], t0) & np.isfinite(lam)
    if not np.any(window):
        raise EstimatorError(f"no speed samples after t0={t0}")
    return float(np.mean(lam[window]))


#####################################
# Profile Alignment
#####################################


def shift_profile(grid: Grid, values: np.ndarray, shift: float) -> np.ndarray:
    """values(x - shift) on the same grid; ends are held at the boundary values."""
    return grid.interpolate(values, grid.x - shift, clamp=True)
