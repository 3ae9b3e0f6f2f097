"""
grid_ops.py - uniform 1-D grid and finite-difference operators.

Every operator is stored as three diagonals plus a boundary-correction
vector, so the same stencil serves matrix-vector products, sparse
factorizations and dense assembly for checks.

Dirichlet grids carry the interior points as unknowns (M-2 of them) and
fold the boundary data into the correction vector. Neumann grids carry
all M points; the correction vector is zero.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse

from stochwave.errors import GridError

#####################################
# Grid
#####################################


class BoundaryKind(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, L] including both end points.

    Attributes:
        length: domain length L.
        n_points: number of grid points M (>= 4).
        bc: boundary condition kind.
        left_value: Dirichlet value at x=0 (ignored for Neumann).
        right_value: Dirichlet value at x=L (ignored for Neumann).
    """

    length: float
    n_points: int
    bc: BoundaryKind = BoundaryKind.NEUMANN
    left_value: float = 0.0
    right_value: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise GridError(f"length must be positive and finite, got {self.length}")
        if int(self.n_points) != self.n_points or self.n_points < 4:
            raise GridError(f"n_points must be an integer >= 4, got {self.n_points}")
        object.__setattr__(self, "bc", BoundaryKind(self.bc))

    @classmethod
    def from_spacing(cls, length: float, dx: float, **kwargs) -> "Grid":
        """Build the grid whose spacing is (as close as possible to) dx."""
        if not dx > 0:
            raise GridError(f"dx must be positive, got {dx}")
        return cls(length=length, n_points=int(round(length / dx)) + 1, **kwargs)

    @property
    def dx(self) -> float:
        return self.length / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_points)

    @property
    def n_unknowns(self) -> int:
        if self.bc is BoundaryKind.DIRICHLET:
            return self.n_points - 2
        return self.n_points

    @property
    def unknown_x(self) -> np.ndarray:
        x = self.x
        return x[1:-1] if self.bc is BoundaryKind.DIRICHLET else x

    def restrict(self, values: np.ndarray) -> np.ndarray:
        """Full-grid samples -> unknown vector."""
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.n_points:
            raise GridError(f"expected {self.n_points} samples, got {values.shape[-1]}")
        if self.bc is BoundaryKind.DIRICHLET:
            return values[..., 1:-1].copy()
        return values.copy()

    def extend(self, unknowns: np.ndarray) -> np.ndarray:
        """Unknown vector -> full-grid samples (Dirichlet data re-attached)."""
        unknowns = np.asarray(unknowns, dtype=float)
        if unknowns.shape[-1] != self.n_unknowns:
            raise GridError(f"expected {self.n_unknowns} unknowns, got {unknowns.shape[-1]}")
        if self.bc is BoundaryKind.DIRICHLET:
            return np.concatenate(([self.left_value], unknowns, [self.right_value]))
        return unknowns.copy()

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Discrete L2 inner product dx * sum(a*b)."""
        return float(self.dx * np.dot(a, b))

    def interpolate(self, values: np.ndarray, points, clamp: bool = False) -> np.ndarray:
        """Piecewise-linear interpolation of full-grid samples.

        Points must lie in [0, L] unless clamp is set, in which case points
        outside take the end values (a shifted front keeps its rest states).
        """
        points = np.asarray(points, dtype=float)
        if not clamp and (np.any(points < 0.0) or np.any(points > self.length)):
            raise GridError(f"interpolation points must lie in [0, {self.length}]")
        return np.interp(points, self.x, values)


#####################################
# Difference Operators
#####################################


class OperatorKind(str, Enum):
    LAPLACIAN = "laplacian"
    LEFT = "left"
    RIGHT = "right"
    CENTRAL = "central"
    BLEND = "blend"


@dataclass(frozen=True, eq=False)
class DiffOperator:
    """Tridiagonal stencil acting on the unknown vector.

    Attributes:
        kind: which operator this is.
        lower: sub-diagonal, length n-1.
        diag: main diagonal, length n.
        upper: super-diagonal, length n-1.
        boundary: Dirichlet correction (eta for first derivatives,
            phi for the Laplacian); zero for Neumann.
        weight: D_L weight of a blended operator, None otherwise.
    """

    kind: OperatorKind
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    boundary: np.ndarray
    weight: float | None = None

    @property
    def size(self) -> int:
        return self.diag.size

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Stencil product without the boundary correction."""
        out = self.diag * v
        out[1:] += self.lower * v[:-1]
        out[:-1] += self.upper * v[1:]
        return out

    def apply_with_boundary(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v) + self.boundary

    def to_sparse(self) -> scipy.sparse.csc_matrix:
        return scipy.sparse.diags(
            [self.lower, self.diag, self.upper], offsets=[-1, 0, 1],
            shape=(self.size, self.size), format="csc",
        )

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def _check_grid(grid: Grid) -> None:
    if not isinstance(grid, Grid):
        raise GridError(f"expected a Grid, got {type(grid).__name__}")


def build_laplacian(grid: Grid) -> DiffOperator:
    """Second-derivative matrix A with its boundary vector phi."""
    _check_grid(grid)
    n = grid.n_unknowns
    inv = 1.0 / grid.dx**2
    diag = np.full(n, -2.0 * inv)
    lower = np.full(n - 1, inv)
    upper = np.full(n - 1, inv)
    phi = np.zeros(n)
    if grid.bc is BoundaryKind.NEUMANN:
        # reflected ghost points: rows (-2, 2) and (2, -2)
        upper[0] = 2.0 * inv
        lower[-1] = 2.0 * inv
    else:
        phi[0] = grid.left_value * inv
        phi[-1] = grid.right_value * inv
    return DiffOperator(OperatorKind.LAPLACIAN, lower, diag, upper, phi)


def build_first_derivative(grid: Grid, kind: OperatorKind | str) -> DiffOperator:
    """One-sided (left/right) or central first-derivative stencil.

    Neumann rows at the two end points are zero (u_x = 0 is imposed there).
    """
    _check_grid(grid)
    kind = OperatorKind(kind)
    n = grid.n_unknowns
    dx = grid.dx
    lower = np.zeros(n - 1)
    diag = np.zeros(n)
    upper = np.zeros(n - 1)
    eta = np.zeros(n)
    gl, gr = grid.left_value, grid.right_value

    if kind is OperatorKind.LEFT:
        diag[:] = 1.0 / dx
        lower[:] = -1.0 / dx
        eta[0] = -gl / dx
    elif kind is OperatorKind.RIGHT:
        diag[:] = -1.0 / dx
        upper[:] = 1.0 / dx
        eta[-1] = gr / dx
    elif kind is OperatorKind.CENTRAL:
        lower[:] = -0.5 / dx
        upper[:] = 0.5 / dx
        eta[0] = -0.5 * gl / dx
        eta[-1] = 0.5 * gr / dx
    else:
        raise GridError(f"not a first-derivative kind: {kind.value}")

    if grid.bc is BoundaryKind.NEUMANN:
        diag[0] = diag[-1] = 0.0
        upper[0] = 0.0
        lower[-1] = 0.0
        eta[:] = 0.0
    return DiffOperator(kind, lower, diag, upper, eta)


def blend_weight(speed: float, beta: float) -> float:
    """D_L weight w = exp(-beta * speed), clamped to [0, 1]."""
    if not beta >= 0:
        raise GridError(f"beta must be non-negative, got {beta}")
    if beta == 0.0 or math.isnan(speed):
        return 1.0
    w = math.exp(min(-beta * speed, 700.0))
    return float(min(max(w, 0.0), 1.0))


def build_upwind_blend(grid: Grid, speed: float, beta: float, mirrored: bool = False) -> DiffOperator:
    """w * D_L + (1 - w) * D_R with the weight from blend_weight.

    mirrored=True gives the reflected blend for fronts with u_- = 1 on the
    left: w = blend_weight(-speed, beta) goes to D_R and 1 - w to D_L, so a
    right-moving front is differenced from its upwind side.
    """
    left = build_first_derivative(grid, OperatorKind.LEFT)
    right = build_first_derivative(grid, OperatorKind.RIGHT)
    if mirrored:
        w_left = 1.0 - blend_weight(-speed, beta)
    else:
        w_left = blend_weight(speed, beta)
    w_right = 1.0 - w_left
    return DiffOperator(
        OperatorKind.BLEND,
        lower=w_left * left.lower + w_right * right.lower,
        diag=w_left * left.diag + w_right * right.diag,
        upper=w_left * left.upper + w_right * right.upper,
        boundary=w_left * left.boundary + w_right * right.boundary,
        weight=w_left,
    )


def full_grid_derivative(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Central difference of full-grid samples, zero at both end points."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * grid.dx)
    return out
