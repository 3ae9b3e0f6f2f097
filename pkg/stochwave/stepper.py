"""
stepper.py - time integration of the free and frozen (S)PDE.

All schemes treat the Laplacian implicitly and everything else
explicitly, so each step solves with the same matrix I - dt*A. The
factorization is built once per Integrator and only read afterwards.

Frozen schemes add the unknown frame speed lambda and the phase
condition <D_C u_hat, v - u_hat> = 0; the resulting bordered system is
solved by block elimination against the shared factorization:

    [ I - dt A        -dt (D v^n + eta) ] [ v^{n+1}      ]   [ r            ]
    [ dx (D_C u_hat)^T        0         ] [ lambda^{n+1} ] = [ <D_C u_hat, u_hat> ]

Numerical failure is reported through the state status (BlownUp), never
by raising from a step.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np
import scipy.sparse
from scipy.sparse.linalg import splu

from stochwave.errors import BorderedSystemError, SolverStateError
from stochwave.grid_ops import (
    Grid,
    OperatorKind,
    build_first_derivative,
    build_laplacian,
    build_upwind_blend,
)
from stochwave.model import ConversionTarget, Interpretation, ModelSpec, corrected_drift
from stochwave.wave_metrics import has_crossing

#####################################
# Defaults
#####################################

DEFAULT_BETA = 0.5
DEFAULT_BLOWUP_THRESHOLD = 25.0
DEFAULT_EXTINCTION_PATIENCE = 10

#####################################
# Types
#####################################


class Status(str, Enum):
    RUNNING = "running"
    BLOWN_UP = "blown_up"
    EXTINCT = "extinct"
    DONE = "done"


class Scheme(str, Enum):
    """EULER_HEUN integrates the Stratonovich form, EULER_MARUYAMA the Ito form."""

    EULER_HEUN = "euler_heun"
    EULER_MARUYAMA = "euler_maruyama"


class Advection(str, Enum):
    """First-derivative stencil for the frame advection term lambda v_x.

    CENTRAL is D_C. UPWIND is the beta-blend of D_L and D_R taken from the
    upwind side of the front (see build_upwind_blend).
    """

    CENTRAL = "central"
    UPWIND = "upwind"


@dataclass(frozen=True, eq=False)
class SolverState:
    """Solution at one time level.

    gamma accumulates the frame position with the left-point rule
    gamma += lam * dt, lam being the speed used over the step.
    """

    u: np.ndarray
    lam: float = 0.0
    gamma: float = 0.0
    t: float = 0.0
    step: int = 0
    status: Status = Status.RUNNING
    status_step: int | None = None

    @property
    def running(self) -> bool:
        return self.status is Status.RUNNING


@dataclass(frozen=True, eq=False)
class BorderedSystem:
    """Linear implicit Euler step of the frozen system, in block form."""

    principal: scipy.sparse.csc_matrix
    border_column: np.ndarray
    border_row: np.ndarray
    rhs: np.ndarray
    rhs_scalar: float

    def to_dense(self) -> np.ndarray:
        n = self.rhs.size
        dense = np.zeros((n + 1, n + 1))
        dense[:n, :n] = self.principal.toarray()
        dense[:n, n] = self.border_column
        dense[n, :n] = self.border_row
        return dense

    def dense_rhs(self) -> np.ndarray:
        return np.append(self.rhs, self.rhs_scalar)


#####################################
# Integrator
#####################################


class Integrator:
    """Operators, factorization and template shared by every step of a run.

    Args:
        grid: spatial grid.
        model: reaction/noise model.
        dt: time step.
        template: template u_hat on the unknowns (needed by frozen steps).
        advection: stencil for lambda v_x in frozen and fixed-speed steps.
        beta: blending parameter of the UPWIND stencil.
        mirrored: the front has u_- = 1 on the left (decides the upwind side).
        c0: C(0) of the noise covariance, used by drift corrections.
        scheme: stochastic scheme; None picks Euler-Heun for Stratonovich
            models and Euler-Maruyama for Ito models.
        blowup_threshold: sup-norm above which a state counts as blown up.
    """

    def __init__(
        self,
        grid: Grid,
        model: ModelSpec,
        dt: float,
        *,
        template: np.ndarray | None = None,
        advection: Advection | str = Advection.CENTRAL,
        beta: float = DEFAULT_BETA,
        mirrored: bool = True,
        c0: float = 0.0,
        scheme: Scheme | None = None,
        blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    ):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.grid = grid
        self.model = model
        self.dt = float(dt)
        self.advection_kind = Advection(advection)
        self.beta = float(beta)
        self.mirrored = bool(mirrored)
        self.c0 = float(c0)
        self.blowup_threshold = float(blowup_threshold)
        if scheme is None:
            scheme = (
                Scheme.EULER_MARUYAMA
                if model.interpretation is Interpretation.ITO
                else Scheme.EULER_HEUN
            )
        self.scheme = Scheme(scheme)

        self.laplacian = build_laplacian(grid)
        self.central = build_first_derivative(grid, OperatorKind.CENTRAL)
        identity = scipy.sparse.identity(grid.n_unknowns, format="csc")
        self.principal = (identity - self.dt * self.laplacian.to_sparse()).tocsc()
        self._factor = splu(self.principal)

        self.template = None
        if template is not None:
            self.set_template(template)

    def set_template(self, template: np.ndarray) -> None:
        template = np.asarray(template, dtype=float)
        if template.shape != (self.grid.n_unknowns,):
            raise ValueError(f"template must have {self.grid.n_unknowns} entries")
        self.template = template
        self.template_derivative = self.central.apply_with_boundary(template)
        self.border_row = self.grid.dx * self.template_derivative
        self.phase_target = self.grid.inner(self.template_derivative, template)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._factor.solve(rhs)

    def phase_residual(self, v: np.ndarray) -> float:
        """<D_C u_hat, v - u_hat>."""
        return self.grid.inner(self.template_derivative, v - self.template)

    #####################################
    # Explicit terms
    #####################################

    def drift(self, v: np.ndarray, scheme: Scheme) -> np.ndarray:
        """Reaction term in the form the scheme integrates."""
        model = self.model
        if not model.is_noisy:
            return model.f(v)
        if scheme is Scheme.EULER_HEUN and model.interpretation is Interpretation.ITO:
            return corrected_drift(v, model, self.c0, ConversionTarget.STRATONOVICH_FORM)
        if scheme is Scheme.EULER_MARUYAMA and model.interpretation is Interpretation.STRATONOVICH:
            return corrected_drift(v, model, self.c0, ConversionTarget.ITO_FORM)
        return model.f(v)

    def noise_term(self, v: np.ndarray, dW: np.ndarray, scheme: Scheme) -> np.ndarray:
        g0 = self.model.g(v)
        if scheme is Scheme.EULER_HEUN:
            z = v + g0 * dW
            g_bar = 0.5 * (self.model.g(z) + g0)
        else:
            g_bar = g0
        return g_bar * dW

    def explicit_rhs(self, v: np.ndarray, dW: np.ndarray | None, scheme: Scheme) -> np.ndarray:
        """v + dt (f + phi) [+ noise]."""
        rhs = v + self.dt * (self.drift(v, scheme) + self.laplacian.boundary)
        if dW is not None:
            rhs = rhs + self.noise_term(v, dW, scheme)
        return rhs

    def advection(self, v: np.ndarray, speed: float) -> np.ndarray:
        """D v + eta with the configured stencil at the given frame speed."""
        if self.advection_kind is Advection.CENTRAL:
            return self.central.apply_with_boundary(v)
        return build_upwind_blend(self.grid, speed, self.beta, self.mirrored).apply_with_boundary(v)

    def assemble_bordered(self, state: SolverState, dW: np.ndarray | None, scheme: Scheme) -> BorderedSystem:
        if self.template is None:
            raise ValueError("frozen steps need a template")
        v = state.u
        return BorderedSystem(
            principal=self.principal,
            border_column=-self.dt * self.advection(v, state.lam),
            border_row=self.border_row,
            rhs=self.explicit_rhs(v, dW, scheme),
            rhs_scalar=self.phase_target,
        )

    #####################################
    # Health
    #####################################

    def finish_step(self, state: SolverState, v: np.ndarray, lam: float, gamma: float) -> SolverState:
        step = state.step + 1
        new = replace(state, u=v, lam=lam, gamma=gamma, t=step * self.dt, step=step)
        if not (math.isfinite(lam) and np.all(np.isfinite(v))):
            return replace(new, status=Status.BLOWN_UP, status_step=step)
        if np.max(np.abs(v)) > self.blowup_threshold:
            return replace(new, status=Status.BLOWN_UP, status_step=step)
        return new

    def blown_up(self, state: SolverState) -> SolverState:
        step = state.step + 1
        return replace(state, t=step * self.dt, step=step, status=Status.BLOWN_UP, status_step=step)


#####################################
# Bordered Solve
#####################################


def solve_bordered(system: BorderedSystem, solve: Callable[[np.ndarray], np.ndarray]) -> tuple[np.ndarray, float]:
    """Block elimination against a factorization of the principal block.

    Args:
        system: the bordered system.
        solve: applies the inverse of the principal block.

    Returns:
        tuple: (v, lam).

    Raises:
        BorderedSystemError: the phase condition is degenerate.
    """
    y_rhs = solve(system.rhs)
    y_col = solve(system.border_column)
    pivot = float(np.dot(system.border_row, y_col))
    scale = float(np.linalg.norm(system.border_row) * np.linalg.norm(y_col))
    if not math.isfinite(pivot) or abs(pivot) <= 1e-14 * max(scale, 1e-300):
        raise BorderedSystemError(f"degenerate phase condition (pivot {pivot:.3e})", pivot)
    lam = (float(np.dot(system.border_row, y_rhs)) - system.rhs_scalar) / pivot
    return y_rhs - lam * y_col, lam


#####################################
# Steps
#####################################


def _check_running(state: SolverState) -> None:
    if not state.running:
        raise SolverStateError(f"state is {state.status.value} since step {state.status_step}")


def step_pde(state: SolverState, ops: Integrator) -> SolverState:
    """(I - dt A) u+ = u + dt (f(u) + phi); lambda stays 0."""
    return step_spde(state, ops, None)


def step_spde(
    state: SolverState, ops: Integrator, dW: np.ndarray | None, scheme: Scheme | None = None
) -> SolverState:
    """Semi-implicit Euler-Heun (Stratonovich) or Euler-Maruyama (Ito) step."""
    _check_running(state)
    scheme = ops.scheme if scheme is None else Scheme(scheme)
    v = ops.solve(ops.explicit_rhs(state.u, dW, scheme))
    return ops.finish_step(state, v, state.lam, state.gamma + state.lam * ops.dt)


def step_pdae(state: SolverState, ops: Integrator) -> SolverState:
    """Linear implicit Euler step of the frozen deterministic system."""
    return step_spdae(state, ops, None)


def step_spdae(
    state: SolverState, ops: Integrator, dW: np.ndarray | None, scheme: Scheme | None = None
) -> SolverState:
    """Frozen step: new v and lambda with the phase condition holding at n+1.

    An UPWIND advection stencil takes its weight from the previous lambda;
    lambda^{n+1} is the unknown of the bordered solve.
    """
    _check_running(state)
    scheme = ops.scheme if scheme is None else Scheme(scheme)
    try:
        v, lam = solve_bordered(ops.assemble_bordered(state, dW, scheme), ops.solve)
    except BorderedSystemError:
        return ops.blown_up(state)
    return ops.finish_step(state, v, lam, state.gamma + lam * ops.dt)


def step_frozen_with_fixed_speed(
    state: SolverState,
    ops: Integrator,
    speed: float,
    dW: np.ndarray | None = None,
    scheme: Scheme | None = None,
) -> SolverState:
    """SPDE step in a frame moving at a prescribed speed (no constraint)."""
    _check_running(state)
    scheme = ops.scheme if scheme is None else Scheme(scheme)
    rhs = ops.explicit_rhs(state.u, dW, scheme)
    if speed != 0.0:
        rhs = rhs + ops.dt * speed * ops.advection(state.u, speed)
    v = ops.solve(rhs)
    return ops.finish_step(state, v, float(speed), state.gamma + speed * ops.dt)


#####################################
# Run Loop
#####################################


class ExtinctionWatch:
    """Marks a state Extinct once no interior crossing of the mid level has
    existed for `patience` consecutive steps."""

    def __init__(self, grid: Grid, level: float, patience: int = DEFAULT_EXTINCTION_PATIENCE):
        self.grid = grid
        self.level = level
        self.patience = patience
        self._missing = 0

    def check(self, state: SolverState) -> SolverState:
        if not state.running:
            return state
        crossed = has_crossing(self.grid.extend(state.u)[1:-1], self.level)
        self._missing = 0 if crossed else self._missing + 1
        if self._missing >= self.patience:
            return replace(state, status=Status.EXTINCT, status_step=state.step)
        return state


def integrate(
    state: SolverState,
    advance: Callable[[SolverState, int], SolverState],
    n_steps: int,
    *,
    hook: Callable[[SolverState], None] | None = None,
    watch: ExtinctionWatch | None = None,
) -> SolverState:
    """Run up to n_steps steps, calling hook on the initial and every new state.

    Args:
        state: initial state.
        advance: (state, step index) -> next state.
        n_steps: number of steps.
        hook: snapshot/recording callback.
        watch: optional extinction detector.

    Returns:
        SolverState: the last state; Done if every step was taken.
    """
    if hook is not None:
        hook(state)
    for n in range(n_steps):
        if not state.running:
            break
        state = advance(state, n)
        if watch is not None:
            state = watch.check(state)
        if hook is not None:
            hook(state)
    if state.running:
        state = replace(state, status=Status.DONE)
    return state
