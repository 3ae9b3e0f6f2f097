"""Shared fixtures: small grids and configurations that run in well under a second."""

import math

import pytest

from stochwave.ensemble import EnsembleConfig, RunKind
from stochwave.grid_ops import Grid
from stochwave.model import ModelSpec, ProfileSpec
from stochwave.noise_gen import build_noise_model

SMOOTH_K = 1.0 / math.sqrt(2.0)


@pytest.fixture
def small_grid():
    return Grid(length=60.0, n_points=301)


@pytest.fixture
def front():
    return ProfileSpec(k=SMOOTH_K, x0=24.0, mirrored=True)


@pytest.fixture
def small_config(small_grid, front):
    """Stratonovich multiplicative noise on a short run."""
    model = ModelSpec(alpha=-0.25, mu=0.1)
    noise = build_noise_model(small_grid.length, 0.5, max_modes=small_grid.n_points)
    return EnsembleConfig(
        grid=small_grid,
        model=model,
        noise=noise,
        run_kind=RunKind.SPDE,
        realizations=4,
        master_seed=11,
        dt=0.05,
        t_final=4.0,
        initial=front,
        run_id="small",
    )
