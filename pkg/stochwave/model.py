"""
model.py - Nagumo reaction and noise terms, drift corrections, fronts.

    du = [u_xx + u(1-u)(u-alpha)] dt + (nu + mu u(1-u)) o dW

The reaction f and noise coefficient g default to the Nagumo forms but
ModelSpec accepts other scalar closures, so the steppers serve any
scalar reaction-diffusion model.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.special import expit

from stochwave.errors import ModelError

ScalarField = Callable[[np.ndarray], np.ndarray]

#####################################
# Nagumo Terms
#####################################


def drift(u, alpha: float):
    """f(u) = u (1 - u) (u - alpha)."""
    return u * (1.0 - u) * (u - alpha)


def diffusion(u, nu: float, mu: float):
    """g(u) = nu + mu u (1 - u)."""
    return nu + mu * u * (1.0 - u)


def diffusion_derivative(u, mu: float):
    """g'(u) = mu (1 - 2u)."""
    return mu * (1.0 - 2.0 * u)


#####################################
# Model Specification
#####################################


class Interpretation(str, Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"


class ConversionTarget(str, Enum):
    """Form the corrected drift is written for."""

    ITO_FORM = "ito_form"
    STRATONOVICH_FORM = "stratonovich_form"


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the scalar SPDE.

    Attributes:
        alpha: Nagumo nonlinearity parameter.
        nu: additive noise amplitude.
        mu: multiplicative noise amplitude.
        interpretation: stochastic integral the noise term is read in.
        drift_fn, diffusion_fn, diffusion_derivative_fn: optional closures
            replacing f, g and g'. They must be module-level functions when
            ensembles run in worker processes.
    """

    alpha: float = -0.25
    nu: float = 0.0
    mu: float = 0.0
    interpretation: Interpretation = Interpretation.STRATONOVICH
    drift_fn: ScalarField | None = None
    diffusion_fn: ScalarField | None = None
    diffusion_derivative_fn: ScalarField | None = None

    def __post_init__(self):
        object.__setattr__(self, "interpretation", Interpretation(self.interpretation))
        for name in ("alpha", "nu", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ModelError(f"{name} must be finite, got {getattr(self, name)}")
        if self.nu < 0 or self.mu < 0:
            raise ModelError(f"noise amplitudes must be non-negative, got nu={self.nu}, mu={self.mu}")

    @property
    def is_noisy(self) -> bool:
        return self.nu != 0.0 or self.mu != 0.0 or self.diffusion_fn is not None

    def f(self, u):
        if self.drift_fn is not None:
            return self.drift_fn(u)
        return drift(u, self.alpha)

    def g(self, u):
        if self.diffusion_fn is not None:
            return self.diffusion_fn(u)
        return diffusion(u, self.nu, self.mu)

    def dg(self, u):
        if self.diffusion_derivative_fn is not None:
            return self.diffusion_derivative_fn(u)
        return diffusion_derivative(u, self.mu)


def corrected_drift(u, spec: ModelSpec, c0: float, target: ConversionTarget | str):
    """Drift with the Ito/Stratonovich conversion term.

    ITO_FORM turns a Stratonovich model into its Ito equivalent,
    f - C(0) g' g; STRATONOVICH_FORM goes the other way, f + C(0) g' g.
    """
    target = ConversionTarget(target)
    sign = -1.0 if target is ConversionTarget.ITO_FORM else 1.0
    return spec.f(u) + sign * c0 * spec.dg(u) * spec.g(u)


#####################################
# Front Profiles
#####################################


@dataclass(frozen=True)
class ProfileSpec:
    """Logistic front u_k(x - x0) = 1 / (1 + exp(-k (x - x0))).

    mirrored=True evaluates u_k(x0 - x) instead: the u=1 state sits on the
    left and a front invading u=0 moves toward +x.
    """

    k: float
    x0: float = 0.0
    mirrored: bool = False

    def __post_init__(self):
        if not self.k > 0:
            raise ModelError(f"steepness k must be positive, got {self.k}")

    @property
    def rest_states(self) -> tuple[float, float]:
        """(u_-, u_+): values at the left and right ends."""
        return (1.0, 0.0) if self.mirrored else (0.0, 1.0)


def profile(spec: ProfileSpec, x):
    z = spec.k * (np.asarray(x, dtype=float) - spec.x0)
    value = expit(-z if spec.mirrored else z)
    return float(value) if np.ndim(value) == 0 else value


#####################################
# Theoretical Speeds
#####################################


@dataclass(frozen=True)
class SpeedPrediction:
    value: float
    exact: bool
    regime: str


def theoretical_speed(alpha: float, k0: float) -> SpeedPrediction:
    """Asymptotic speed of the deterministic front from u_{k0} initial data.

    Speeds are positive in the direction of propagation.
    """
    if not -1.0 < alpha <= 0.5:
        raise ModelError(f"alpha must lie in (-1, 1/2], got {alpha}")
    if not k0 > 0:
        raise ModelError(f"k0 must be positive, got {k0}")
    pushed = math.sqrt(2.0) * (0.5 - alpha)
    if alpha > 0.0:
        return SpeedPrediction(pushed, True, "bistable")
    if alpha > -0.5:
        k_star = -alpha * math.sqrt(2.0)
        if k0 >= k_star:
            return SpeedPrediction(pushed, True, "pushed")
        return SpeedPrediction((k0**2 - alpha) / k0, False, "tail-selected")
    k_dag = math.sqrt(abs(alpha))
    return SpeedPrediction(2.0 * k_dag, k0 >= k_dag, "pulled")


def semi_implicit_tail_speed(alpha: float, k: float, dt: float, dx: float) -> float:
    """Speed of the exp(-k x) tail under the semi-implicit Euler step.

    The linearization at u = 0 multiplies the tail by
    (1 - alpha dt) / (1 - dt s) per step, with s the Laplacian symbol
    2 (cosh(k dx) - 1) / dx^2. Tends to (k^2 - alpha) / k as dt, dx -> 0.
    """
    if not (k > 0 and dt > 0 and dx > 0):
        raise ModelError(f"k, dt and dx must be positive, got k={k}, dt={dt}, dx={dx}")
    symbol = 2.0 * (math.cosh(k * dx) - 1.0) / dx**2
    if dt * symbol >= 1.0:
        raise ModelError(f"dt={dt} too large for a tail of steepness k={k}")
    return math.log((1.0 - alpha * dt) / (1.0 - dt * symbol)) / (k * dt)
