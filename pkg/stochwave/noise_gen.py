"""
noise_gen.py - Q-Wiener increments with exponential spatial correlation.

Increments are synthesized in the cosine (Neumann) eigenbasis of d^2/dx^2
on [0, L]:

    dW(x) = sum_{j=0..J} sqrt(zeta_j) phi_j(x) xi_j,   xi_j ~ N(0, dt)

with phi_0 = 1/sqrt(L), phi_j = sqrt(2/L) cos(j pi x / L) and
zeta_j = exp(-xi^2 lambda_j / L), lambda_j = j^2 pi^2 / L^2.

On the uniform grid the sum is a type-I DCT, so synthesis costs
O(M log M). Modes above the grid Nyquist index M-1 alias onto the grid
and are dropped.

Each (master seed, realization, step) triple addresses its own Philox
stream, so any increment can be regenerated without replaying the run.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import json
import math
import pathlib
import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft

from stochwave.errors import (
    NoiseConfigError,
    TrajectoryCorruptError,
    TrajectoryVersionError,
)
from stochwave.grid_ops import Grid
from utils.utils_logger import logger

#####################################
# Defaults
#####################################

DEFAULT_TOLERANCE = 1e-12

NOISE_MAGIC = b"STWN"
NOISE_VERSION = 1

#####################################
# Types
#####################################


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Spectral description of the Q-Wiener process.

    Attributes:
        correlation_length: xi > 0.
        domain_length: L.
        truncation: highest mode index J.
        coefficients: zeta_0..zeta_J.
    """

    correlation_length: float
    domain_length: float
    truncation: int
    coefficients: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.truncation + 1

    def modes_on(self, grid: Grid) -> int:
        """Number of modes the grid can represent without aliasing."""
        return min(self.n_modes, grid.n_points)

    def eigenfunctions(self, x: np.ndarray, n_modes: int | None = None) -> np.ndarray:
        """phi_j(x) for j < n_modes, shape (n_modes, len(x))."""
        n_modes = self.n_modes if n_modes is None else n_modes
        L = self.domain_length
        j = np.arange(n_modes)[:, None]
        phi = math.sqrt(2.0 / L) * np.cos(j * math.pi * np.asarray(x)[None, :] / L)
        phi[0, :] = 1.0 / math.sqrt(L)
        return phi

    def spectral_covariance(self, grid: Grid) -> np.ndarray:
        """sum_j zeta_j phi_j(x) phi_j(y) over grid points (per unit dt)."""
        n = self.modes_on(grid)
        phi = self.eigenfunctions(grid.x, n)
        return (phi * self.coefficients[:n, None]).T @ phi


@dataclass(frozen=True, eq=False)
class NoiseIncrement:
    values: np.ndarray
    dt: float


#####################################
# Covariance and Model Construction
#####################################


def covariance(x, xi: float):
    """C(x) = exp(-pi x^2 / (4 xi^2)) / (2 xi)."""
    if not xi > 0:
        raise NoiseConfigError(f"correlation length must be positive, got {xi}")
    x = np.asarray(x, dtype=float)
    value = np.exp(-math.pi * x**2 / (4.0 * xi**2)) / (2.0 * xi)
    return float(value) if value.ndim == 0 else value


def auto_truncation(length: float, xi: float, tolerance: float = DEFAULT_TOLERANCE) -> int:
    """Smallest J with zeta_J < tolerance."""
    # zeta_J = exp(-xi^2 J^2 pi^2 / L^3)
    j = math.ceil(math.sqrt(-math.log(tolerance) * length**3 / (xi**2 * math.pi**2)))
    while j > 0 and _zeta(j - 1, length, xi) < tolerance:
        j -= 1
    while _zeta(j, length, xi) >= tolerance:
        j += 1
    return j


def _zeta(j, length: float, xi: float):
    lam = (np.asarray(j, dtype=float) * math.pi / length) ** 2
    return np.exp(-(xi**2) * lam / length)


def build_noise_model(
    length: float,
    xi: float,
    truncation: int | None = None,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    max_modes: int | None = None,
) -> NoiseModel:
    """Fill zeta_j for j = 0..J.

    Args:
        length: domain length L.
        xi: correlation length.
        truncation: J, or None to pick the smallest J with zeta_J < tolerance.
        tolerance: cut-off for automatic truncation.
        max_modes: upper bound on J+1 (normally the number of grid points).

    Returns:
        NoiseModel: the spectral model.
    """
    if not length > 0:
        raise NoiseConfigError(f"domain length must be positive, got {length}")
    if not xi > 0:
        raise NoiseConfigError(f"correlation length must be positive, got {xi}")
    if truncation is None:
        j_max = auto_truncation(length, xi, tolerance)
    else:
        if int(truncation) != truncation or truncation < 0:
            raise NoiseConfigError(f"truncation must be a non-negative integer, got {truncation}")
        j_max = int(truncation)
    if max_modes is not None and j_max + 1 > max_modes:
        logger.warning(
            f"Noise truncation J={j_max} exceeds {max_modes} representable modes; capping."
        )
        j_max = max_modes - 1
    coefficients = _zeta(np.arange(j_max + 1), length, xi)
    logger.debug(f"Noise model: L={length}, xi={xi}, J={j_max}, zeta_J={coefficients[-1]:.3e}")
    return NoiseModel(float(xi), float(length), j_max, coefficients)


#####################################
# Sampling
#####################################


def increment_rng(master_seed: int, realization: int, step: int) -> np.random.Generator:
    """Counter-based stream for one (seed, realization, step) triple."""
    seq = np.random.SeedSequence([int(master_seed), int(realization), int(step)])
    return np.random.Generator(np.random.Philox(seq))


def synthesize(model: NoiseModel, grid: Grid, xi: np.ndarray) -> np.ndarray:
    """Evaluate sum_j sqrt(zeta_j) phi_j(x_i) xi_j on every grid point.

    Args:
        model: spectral model; its domain must match the grid.
        grid: target grid.
        xi: mode amplitudes, shape (..., n) with n <= model.modes_on(grid).

    Returns:
        np.ndarray: values of shape (..., grid.n_points).
    """
    if not math.isclose(model.domain_length, grid.length):
        raise NoiseConfigError(
            f"noise domain {model.domain_length} does not match grid length {grid.length}"
        )
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1]
    m = grid.n_points
    if n > model.modes_on(grid):
        raise NoiseConfigError(f"{n} mode amplitudes given, grid supports {model.modes_on(grid)}")
    L = model.domain_length
    scale = np.full(n, math.sqrt(2.0 / L))
    scale[0] = 1.0 / math.sqrt(L)
    c = xi * np.sqrt(model.coefficients[:n]) * scale

    # DCT-I: y_i = a_0 + (-1)^i a_{m-1} + 2 sum_{j=1}^{m-2} a_j cos(pi i j / (m-1))
    a = np.zeros(xi.shape[:-1] + (m,))
    a[..., 0] = c[..., 0]
    inner = min(n, m - 1)
    a[..., 1:inner] = 0.5 * c[..., 1:inner]
    if n == m:
        a[..., m - 1] = c[..., m - 1]
    return scipy.fft.dct(a, type=1, axis=-1)


def sample_increment(
    model: NoiseModel, grid: Grid, dt: float, rng: np.random.Generator
) -> NoiseIncrement:
    """One increment dW_n on the full grid."""
    if not dt > 0:
        raise NoiseConfigError(f"dt must be positive, got {dt}")
    xi = rng.normal(0.0, math.sqrt(dt), size=model.modes_on(grid))
    return NoiseIncrement(synthesize(model, grid, xi), dt)


class NoiseSource:
    """Increments of one realization, addressed by step index."""

    def __init__(self, model: NoiseModel, grid: Grid, dt: float, master_seed: int, realization: int):
        self.model = model
        self.grid = grid
        self.dt = dt
        self.master_seed = master_seed
        self.realization = realization

    def increment(self, step: int) -> NoiseIncrement:
        rng = increment_rng(self.master_seed, self.realization, step)
        return sample_increment(self.model, self.grid, self.dt, rng)

    def unknowns(self, step: int) -> np.ndarray:
        """Increment restricted to the grid's unknowns."""
        return self.grid.restrict(self.increment(step).values)


#####################################
# Increment Dumps
#####################################

# Layout (little endian):
#   magic "STWN" | u16 version | u32 header length | header JSON
#   | u32 n_steps | u32 n_points | n_steps * n_points float64 | "END!"


def write_noise_dump(
    path: pathlib.Path, model: NoiseModel, dt: float, seed: int, realization: int,
    increments: np.ndarray,
) -> pathlib.Path:
    """Write the increments of one realization for replay or debugging."""
    path = pathlib.Path(path)
    increments = np.ascontiguousarray(increments, dtype="<f8")
    header = json.dumps({
        "L": model.domain_length, "xi": model.correlation_length, "J": model.truncation,
        "dt": dt, "seed": int(seed), "realization": int(realization),
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(NOISE_MAGIC)
        fh.write(struct.pack("<HI", NOISE_VERSION, len(header)))
        fh.write(header)
        fh.write(struct.pack("<II", *increments.shape))
        fh.write(increments.tobytes())
        fh.write(b"END!")
    logger.info(f"Wrote {increments.shape[0]} noise increments to {path}")
    return path


def read_noise_dump(path: pathlib.Path) -> tuple[dict, np.ndarray]:
    """Read a dump written by write_noise_dump -> (header, increments)."""
    data = pathlib.Path(path).read_bytes()
    try:
        if data[:4] != NOISE_MAGIC:
            raise TrajectoryCorruptError(f"{path}: not a noise dump")
        version, hlen = struct.unpack_from("<HI", data, 4)
        if version != NOISE_VERSION:
            raise TrajectoryVersionError(f"{path}: noise dump version {version}, expected {NOISE_VERSION}")
        offset = 10
        header = json.loads(data[offset:offset + hlen].decode("utf-8"))
        offset += hlen
        n_steps, n_points = struct.unpack_from("<II", data, offset)
        offset += 8
        count = n_steps * n_points
        values = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise TrajectoryCorruptError(f"{path}: truncated noise dump ({e})") from e
    if data[offset:offset + 4] != b"END!":
        raise TrajectoryCorruptError(f"{path}: missing end marker")
    return header, values.reshape(n_steps, n_points).copy()
