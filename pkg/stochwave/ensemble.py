"""
ensemble.py - Monte-Carlo orchestration over realizations.

A realization is one solver run from the configured initial front with
its own noise stream (master seed, realization index). Realizations run
in a process pool; results are collected in realization order so the
reduction, and hence every summary, is identical for any worker count.

Blown-up and extinct realizations are tallied, never dropped silently:
summaries report statistics over completed realizations, the same
statistics over every realization with a usable estimate, and the
completed fraction.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import math
import pathlib
from dataclasses import dataclass, field, replace
from enum import Enum
from multiprocessing import Pool

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from consumers.trajectory_consumer import ESTIMATOR_NAMES, speed_samples, summarize_record
from producers.trajectory_producer import TrajectoryRecorder, write_trajectory
from stochwave.errors import (
    AllRealizationsFailedError,
    ConfigError,
    GridMismatchError,
    NoiseConfigError,
    StochwaveError,
)
from stochwave.grid_ops import Grid
from stochwave.model import Interpretation, ModelSpec, ProfileSpec, profile
from stochwave.noise_gen import (
    NoiseModel,
    NoiseSource,
    build_noise_model,
    covariance,
    write_noise_dump,
)
from stochwave.stepper import (
    DEFAULT_BETA,
    DEFAULT_BLOWUP_THRESHOLD,
    DEFAULT_EXTINCTION_PATIENCE,
    Advection,
    ExtinctionWatch,
    Integrator,
    Scheme,
    SolverState,
    Status,
    integrate,
    step_frozen_with_fixed_speed,
    step_pdae,
    step_pde,
    step_spdae,
    step_spde,
)
from stochwave.wave_metrics import (
    DEFAULT_LEVEL_OFFSET,
    DEFAULT_WIDTH_DELTA,
    LevelConvention,
    level_crossing,
    level_values,
    shift_profile,
)
from utils.utils_config import RunConfig, get_default_threads
from utils.utils_logger import logger

RESULT_COLUMNS = (
    "run_id", "alpha", "nu", "mu", "xi", "interpretation", "estimator", "value",
    "std_error", "width_mean", "completed", "blown_up", "extinct", "seed",
)
SWEEP_COLUMNS = RESULT_COLUMNS + ("amplitude2", "std", "note")

#####################################
# Configuration
#####################################


class RunKind(str, Enum):
    PDE = "pde"
    PDAE = "pdae"
    SPDE = "spde"
    SPDAE = "spdae"
    FIXED_SPEED = "fixed_speed"

    @property
    def frozen(self) -> bool:
        return self in (RunKind.PDAE, RunKind.SPDAE)

    @property
    def stochastic(self) -> bool:
        return self in (RunKind.SPDE, RunKind.SPDAE, RunKind.FIXED_SPEED)


class SpeedSource(str, Enum):
    """Which statistic of a frozen prior ensemble sets the frame speed."""

    PER_REALIZATION = "per_realization"
    ENSEMBLE_MEAN_LAMBDA = "ensemble_mean_lambda"
    ENSEMBLE_MEAN_TIME_AVERAGE = "ensemble_mean_time_average"


_DEFAULT_FRONT = ProfileSpec(k=1.0 / math.sqrt(2.0), x0=200.0, mirrored=True)


@dataclass(frozen=True, eq=False)
class EnsembleConfig:
    """Everything one ensemble needs.

    template defaults to the initial front; t0 defaults to t_final / 2.
    trajectory_dir, when set, receives one trajectory file per
    realization (and a noise dump when dump_noise is set).
    """

    grid: Grid
    model: ModelSpec
    noise: NoiseModel | None = None
    run_kind: RunKind = RunKind.SPDE
    realizations: int = 1
    master_seed: int = 0
    dt: float = 0.05
    t_final: float = 100.0
    t0: float | None = None
    snapshot_stride: int = 0
    initial: ProfileSpec = _DEFAULT_FRONT
    template: ProfileSpec | None = None
    width_delta: float = DEFAULT_WIDTH_DELTA
    advection: Advection | str = Advection.CENTRAL
    beta: float = DEFAULT_BETA
    scheme: Scheme | None = None
    level_offset: float = DEFAULT_LEVEL_OFFSET
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD
    extinction_patience: int = DEFAULT_EXTINCTION_PATIENCE
    trajectory_dir: str | None = None
    dump_noise: bool = False
    run_id: str = "run"

    def __post_init__(self):
        object.__setattr__(self, "run_kind", RunKind(self.run_kind))
        object.__setattr__(self, "advection", Advection(self.advection))
        if self.template is None:
            object.__setattr__(self, "template", self.initial)
        if self.realizations < 1:
            raise ConfigError("at least one realization is required", "REALIZATIONS")
        if not self.dt > 0 or not self.t_final > 0:
            raise ConfigError("dt and t_final must be positive", "DT")
        if not 0 <= self.resolved_t0 < self.t_final:
            raise ConfigError(f"t0={self.resolved_t0} must lie in [0, {self.t_final})", "T0")
        if self.run_kind.stochastic and self.model.is_noisy and self.noise is None:
            raise NoiseConfigError("a noisy model needs a noise model")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def resolved_t0(self) -> float:
        return 0.5 * self.t_final if self.t0 is None else float(self.t0)

    @property
    def rest_states(self) -> tuple[float, float]:
        return self.initial.rest_states

    @property
    def c0(self) -> float:
        if self.noise is None or not self.model.is_noisy:
            return 0.0
        return covariance(0.0, self.noise.correlation_length)

    def describe(self) -> dict:
        """JSON-ready summary stored in trajectory headers."""
        noise = None
        if self.noise is not None:
            noise = {"xi": self.noise.correlation_length, "J": self.noise.truncation}
        return {
            "run_id": self.run_id,
            "run_kind": self.run_kind.value,
            "frozen": self.run_kind.frozen,
            "seed": int(self.master_seed),
            "dt": self.dt,
            "t_final": self.t_final,
            "t0": self.resolved_t0,
            "snapshot_stride": self.snapshot_stride,
            "advection": self.advection.value,
            "grid": {
                "L": self.grid.length, "M": self.grid.n_points, "bc": self.grid.bc.value,
                "left": self.grid.left_value, "right": self.grid.right_value,
            },
            "model": {
                "alpha": self.model.alpha, "nu": self.model.nu, "mu": self.model.mu,
                "interpretation": self.model.interpretation.value,
            },
            "noise": noise,
            "initial": {"k": self.initial.k, "x0": self.initial.x0, "mirrored": self.initial.mirrored},
            "template": {"k": self.template.k, "x0": self.template.x0, "mirrored": self.template.mirrored},
            "rest_states": list(self.rest_states),
        }


def from_run_config(
    config: RunConfig, run_kind: RunKind | str | None = None, out_dir: pathlib.Path | None = None
) -> EnsembleConfig:
    """Build the numerical configuration described by a run-config file."""
    try:
        grid = Grid.from_spacing(
            config.length, config.dx, bc=config.bc,
            left_value=config.left_value, right_value=config.right_value,
        )
        model = ModelSpec(
            alpha=config.alpha, nu=config.nu, mu=config.mu,
            interpretation=Interpretation(config.interpretation),
        )
        noise = None
        if model.is_noisy:
            noise = build_noise_model(
                config.length, config.xi, config.truncation,
                tolerance=config.noise_tolerance, max_modes=grid.n_points,
            )
        trajectory_dir = None
        if config.write_trajectories and out_dir is not None:
            trajectory_dir = str(pathlib.Path(out_dir) / "trajectories")
        return EnsembleConfig(
            grid=grid,
            model=model,
            noise=noise,
            run_kind=RunKind(run_kind or config.run_kind),
            realizations=config.realizations,
            master_seed=config.seed,
            dt=config.dt,
            t_final=config.t_final,
            t0=config.resolved_t0,
            snapshot_stride=config.snapshot_stride,
            initial=ProfileSpec(config.k0, config.resolved_x0, config.mirrored),
            template=ProfileSpec(config.template_k, config.resolved_template_x0, config.mirrored),
            width_delta=config.width_delta,
            advection=Advection(config.advection),
            beta=config.beta,
            scheme=Scheme(config.scheme) if config.scheme else None,
            level_offset=config.level_offset,
            blowup_threshold=config.blowup_threshold,
            extinction_patience=config.extinction_patience,
            trajectory_dir=trajectory_dir,
            dump_noise=config.dump_noise,
            run_id=config.run_id,
        )
    except ConfigError:
        raise
    except (StochwaveError, ValueError) as e:
        raise ConfigError(str(e)) from e


#####################################
# Single Realization
#####################################


@dataclass(eq=False)
class RealizationOutcome:
    index: int
    status: Status
    status_step: int | None
    estimates: dict
    lambda_samples: np.ndarray
    final_profile: np.ndarray
    c_final: float
    trajectory_path: str | None = None


def run_realization(config: EnsembleConfig, index: int, speed: float = 0.0) -> RealizationOutcome:
    """
    Integrate realization `index` to t_final and summarize its history.

    Args:
        config: ensemble configuration.
        index: realization index; selects the noise stream.
        speed: frame speed for FIXED_SPEED runs.

    Returns:
        RealizationOutcome: status, estimators and final profile.
    """
    grid = config.grid
    kind = config.run_kind
    x = grid.x
    template_full = profile(config.template, x)
    ops = Integrator(
        grid, config.model, config.dt,
        template=grid.restrict(template_full) if kind.frozen else None,
        advection=config.advection, beta=config.beta, mirrored=config.initial.mirrored,
        c0=config.c0, scheme=config.scheme,
        blowup_threshold=config.blowup_threshold,
    )

    source = None
    if kind.stochastic and config.model.is_noisy:
        source = NoiseSource(config.noise, grid, config.dt, config.master_seed, index)
    dumped = [] if (source is not None and config.dump_noise and config.trajectory_dir) else None

    def noise(step: int):
        if source is None:
            return None
        values = source.increment(step).values
        if dumped is not None:
            dumped.append(values)
        return grid.restrict(values)

    if kind is RunKind.PDE:
        def advance(state, n):
            return step_pde(state, ops)
    elif kind is RunKind.PDAE:
        def advance(state, n):
            return step_pdae(state, ops)
    elif kind is RunKind.SPDE:
        def advance(state, n):
            return step_spde(state, ops, noise(n))
    elif kind is RunKind.SPDAE:
        def advance(state, n):
            return step_spdae(state, ops, noise(n))
    else:
        def advance(state, n):
            return step_frozen_with_fixed_speed(state, ops, speed, noise(n))

    meta = config.describe()
    meta.update({"realization": int(index), "speed": float(speed) if kind is RunKind.FIXED_SPEED else 0.0})
    recorder = TrajectoryRecorder(
        grid, meta,
        rest_states=config.rest_states,
        level_offset=config.level_offset,
        width_delta=config.width_delta,
        snapshot_stride=config.snapshot_stride,
        template=None if kind.frozen else template_full,
        initial_shift=config.initial.x0 - config.template.x0,
    )
    mid = level_values(config.rest_states)["c"]
    watch = ExtinctionWatch(grid, mid, config.extinction_patience)

    start = SolverState(
        u=grid.restrict(profile(config.initial, x)),
        lam=float(speed) if kind is RunKind.FIXED_SPEED else 0.0,
    )
    state = integrate(start, advance, config.n_steps, hook=recorder, watch=watch)
    record = recorder.finish(state)

    path = None
    if config.trajectory_dir:
        path = pathlib.Path(config.trajectory_dir) / f"{config.run_id}_r{index:04d}.stwt"
        write_trajectory(path, record)
        if dumped:
            write_noise_dump(
                path.with_suffix(".stwn"), config.noise, config.dt,
                config.master_seed, index, np.asarray(dumped),
            )
        path = str(path)

    if state.status is Status.BLOWN_UP:
        logger.warning(f"{config.run_id}: realization {index} blew up at step {state.status_step}")
    elif state.status is Status.EXTINCT:
        logger.warning(f"{config.run_id}: realization {index} went extinct at step {state.status_step}")
    else:
        logger.debug(f"{config.run_id}: realization {index} done")

    t0 = config.resolved_t0
    c_final = level_crossing(record.final_profile, grid, mid, LevelConvention.SUP_FROM_LEFT)
    return RealizationOutcome(
        index=index,
        status=state.status,
        status_step=state.status_step,
        estimates=summarize_record(record, t0),
        lambda_samples=speed_samples(record, t0),
        final_profile=record.final_profile,
        c_final=math.nan if c_final is None else c_final,
        trajectory_path=path,
    )


def _run_task(task: tuple) -> RealizationOutcome:
    config, index, speed = task
    return run_realization(config, index, speed)


#####################################
# Summaries
#####################################


@dataclass(frozen=True)
class EstimatorStats:
    mean: float
    std: float
    std_error: float
    count: int


def estimator_stats(values) -> EstimatorStats:
    """Mean, sample std and standard error std / sqrt(n) of the finite values."""
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    n = values.size
    if n == 0:
        return EstimatorStats(math.nan, math.nan, math.nan, 0)
    std = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return EstimatorStats(float(np.mean(values)), std, std / math.sqrt(n), n)


@dataclass(eq=False)
class EnsembleSummary:
    """Aggregated results of one ensemble.

    estimators hold completed realizations only; estimators_all also use
    blown-up and extinct realizations wherever their partial history
    yields an estimate.
    """

    run_id: str
    run_kind: RunKind
    grid: Grid
    model: ModelSpec
    xi: float
    seed: int
    realizations: int
    completed: int
    blown_up: int
    extinct: int
    estimators: dict
    estimators_all: dict
    per_realization: pd.DataFrame
    lambda_samples: np.ndarray
    lambda_variance: float
    lambda_mean_full: float
    width: EstimatorStats
    mean_profile: np.ndarray
    aligned_mean_profile: np.ndarray
    speed: float | None = None
    failures: list = field(default_factory=list)

    @property
    def completed_fraction(self) -> float:
        return self.completed / self.realizations

    @property
    def lambda_std(self) -> float:
        return math.sqrt(self.lambda_variance) if math.isfinite(self.lambda_variance) else math.nan

    @property
    def x(self) -> np.ndarray:
        return self.grid.x


def summarize_outcomes(config: EnsembleConfig, outcomes: list, speed: float | None = None) -> EnsembleSummary:
    """Ordered reduction of realization outcomes into an EnsembleSummary."""
    outcomes = sorted(outcomes, key=lambda o: o.index)
    completed = [o for o in outcomes if o.status is Status.DONE]
    blown_up = sum(o.status is Status.BLOWN_UP for o in outcomes)
    extinct = sum(o.status is Status.EXTINCT for o in outcomes)
    failures = [(o.index, o.status.value, o.status_step) for o in outcomes if o.status is not Status.DONE]
    if not completed:
        raise AllRealizationsFailedError(
            f"{config.run_id}: all {len(outcomes)} realizations failed "
            f"({blown_up} blown up, {extinct} extinct)",
            blown_up, extinct,
        )

    frame = pd.DataFrame([
        {"realization": o.index, "status": o.status.value, "status_step": o.status_step, **o.estimates}
        for o in outcomes
    ])
    done = (frame["status"] == Status.DONE.value).to_numpy()
    estimators = {name: estimator_stats(frame[name].to_numpy()[done]) for name in ESTIMATOR_NAMES}
    estimators_all = {name: estimator_stats(frame[name].to_numpy()) for name in ESTIMATOR_NAMES}

    samples = np.concatenate([o.lambda_samples for o in completed])
    full_count = sum(o.estimates["lambda_full_count"] for o in completed)
    full_sum = sum(o.estimates["lambda_full_sum"] for o in completed)

    profiles = np.stack([o.final_profile for o in completed])
    mean_profile = profiles.mean(axis=0)
    if config.run_kind.frozen:
        aligned = mean_profile
    else:
        reference = config.template.x0
        moved = [
            shift_profile(config.grid, o.final_profile, reference - o.c_final)
            for o in completed if math.isfinite(o.c_final)
        ]
        aligned = np.mean(moved, axis=0) if moved else np.full_like(mean_profile, np.nan)

    return EnsembleSummary(
        run_id=config.run_id,
        run_kind=config.run_kind,
        grid=config.grid,
        model=config.model,
        xi=config.noise.correlation_length if config.noise is not None else math.nan,
        seed=config.master_seed,
        realizations=len(outcomes),
        completed=len(completed),
        blown_up=int(blown_up),
        extinct=int(extinct),
        estimators=estimators,
        estimators_all=estimators_all,
        per_realization=frame,
        lambda_samples=samples,
        lambda_variance=float(np.var(samples, ddof=1)) if samples.size > 1 else math.nan,
        lambda_mean_full=full_sum / full_count if full_count else math.nan,
        width=estimator_stats(frame["width_mean"].to_numpy()[done]),
        mean_profile=mean_profile,
        aligned_mean_profile=aligned,
        speed=speed,
        failures=failures,
    )


#####################################
# Ensembles
#####################################


def run_ensemble(
    config: EnsembleConfig, threads: int | None = None, speeds=None
) -> EnsembleSummary:
    """
    Run every realization of `config` and aggregate.

    Args:
        config: ensemble configuration.
        threads: worker processes; None reads STW_THREADS.
        speeds: frame speed(s) for FIXED_SPEED runs, a scalar or one per realization.

    Raises:
        AllRealizationsFailedError: no realization completed.
    """
    threads = get_default_threads() if threads is None else max(int(threads), 1)
    n = config.realizations
    speeds = np.broadcast_to(np.asarray(0.0 if speeds is None else speeds, dtype=float), (n,))
    tasks = [(config, i, float(speeds[i])) for i in range(n)]
    logger.info(
        f"START ensemble {config.run_id}: {config.run_kind.value}, R={n}, "
        f"alpha={config.model.alpha}, nu={config.model.nu}, mu={config.model.mu}, "
        f"{config.model.interpretation.value}, workers={min(threads, n)}"
    )
    if threads <= 1 or n == 1:
        outcomes = [_run_task(task) for task in tasks]
    else:
        with Pool(processes=min(threads, n)) as pool:
            outcomes = list(pool.imap(_run_task, tasks))

    speed = float(np.mean(speeds)) if config.run_kind is RunKind.FIXED_SPEED else None
    summary = summarize_outcomes(config, outcomes, speed)
    logger.info(
        f"END ensemble {config.run_id}: completed {summary.completed}/{n}, "
        f"blown up {summary.blown_up}, extinct {summary.extinct}"
    )
    return summary


def weak_error(first: EnsembleSummary, second: EnsembleSummary, aligned: bool = True) -> float:
    """Squared L2 distance of the two mean final profiles (trapezoidal rule).

    aligned=True compares the c-aligned means; frozen ensembles are never
    shifted, their aligned mean is the raw mean.
    """
    if first.grid != second.grid:
        raise GridMismatchError("mean profiles live on different grids")
    a = first.aligned_mean_profile if aligned else first.mean_profile
    b = second.aligned_mean_profile if aligned else second.mean_profile
    return float(trapezoid((a - b) ** 2, first.x))


def lambda_histogram(summary: EnsembleSummary, bins: int = 50) -> pd.DataFrame:
    """Pooled instantaneous-speed samples as bin edges and counts."""
    samples = summary.lambda_samples
    if samples.size == 0:
        return pd.DataFrame(columns=["bin_left", "bin_right", "count"])
    counts, edges = np.histogram(samples, bins=bins)
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})


def speeds_from_prior(prior: EnsembleSummary, source: SpeedSource | str, realizations: int) -> np.ndarray:
    """Frame speed per realization taken from a frozen prior ensemble."""
    source = SpeedSource(source)
    if source is SpeedSource.ENSEMBLE_MEAN_LAMBDA:
        return np.full(realizations, prior.lambda_mean_full)
    mean = prior.estimators["lambda_min"].mean
    if source is SpeedSource.ENSEMBLE_MEAN_TIME_AVERAGE:
        return np.full(realizations, mean)
    own = prior.per_realization.set_index("realization")["lambda_min"]
    speeds = np.full(realizations, mean)
    for i in range(realizations):
        value = own.get(i, math.nan)
        if math.isfinite(value):
            speeds[i] = value
        else:
            logger.warning(f"No prior speed for realization {i}; using the ensemble mean {mean:.6g}")
    return speeds


def fixed_speed_ensemble(
    config: EnsembleConfig,
    speed_source: SpeedSource | str | float,
    prior: EnsembleSummary | None = None,
    threads: int | None = None,
) -> EnsembleSummary:
    """
    Run realizations in a frame moving at an externally supplied speed.

    A numeric speed_source is used directly. Otherwise the speed is a
    statistic of `prior`, a frozen ensemble run first when not given.
    """
    if isinstance(speed_source, (int, float)) and not isinstance(speed_source, bool):
        speeds = float(speed_source)
    else:
        if prior is None:
            logger.info(f"{config.run_id}: running frozen prior pass for the frame speed")
            prior = run_ensemble(
                replace(config, run_kind=RunKind.SPDAE, run_id=f"{config.run_id}-prior", trajectory_dir=None),
                threads,
            )
        speeds = speeds_from_prior(prior, speed_source, config.realizations)
        logger.info(f"{config.run_id}: frame speed from {SpeedSource(speed_source).value}: mean {np.mean(speeds):.6g}")
    return run_ensemble(replace(config, run_kind=RunKind.FIXED_SPEED), threads, speeds=speeds)


#####################################
# Tables
#####################################


def results_rows(summary: EnsembleSummary) -> list:
    """One ResultsTable row per available estimator, the completed fraction
    and the lambda spread."""
    base = {
        "run_id": summary.run_id,
        "alpha": summary.model.alpha,
        "nu": summary.model.nu,
        "mu": summary.model.mu,
        "xi": summary.xi,
        "interpretation": summary.model.interpretation.value,
        "width_mean": summary.width.mean,
        "completed": summary.completed,
        "blown_up": summary.blown_up,
        "extinct": summary.extinct,
        "seed": summary.seed,
    }
    rows = []
    for name, stats in summary.estimators.items():
        if stats.count == 0:
            continue
        rows.append({**base, "estimator": name, "value": stats.mean, "std_error": stats.std_error, "std": stats.std})
    rows.append({
        **base, "estimator": "completed_fraction", "value": summary.completed_fraction,
        "std_error": math.nan, "std": math.nan,
    })
    rows.append({**base, "estimator": "lambda_std", "value": summary.lambda_std, "std_error": math.nan, "std": math.nan})
    return rows


def failure_row(run_id: str, model: ModelSpec, xi: float, seed: int, error: StochwaveError) -> dict:
    """ResultsTable row for an ensemble without a single completed realization.

    The value is the completed fraction (0); the tallies come from the error
    when it carries them.
    """
    return {
        "run_id": run_id,
        "alpha": model.alpha,
        "nu": model.nu,
        "mu": model.mu,
        "xi": xi,
        "interpretation": model.interpretation.value,
        "estimator": "completed_fraction",
        "value": 0.0,
        "std_error": math.nan,
        "std": math.nan,
        "width_mean": math.nan,
        "completed": 0,
        "blown_up": getattr(error, "blown_up", 0),
        "extinct": getattr(error, "extinct", 0),
        "seed": seed,
    }


def sweep(
    base: EnsembleConfig,
    amplitude2_grid,
    xi_grid,
    alpha_grid,
    interpretations,
    *,
    amplitude: str = "mu",
    threads: int | None = None,
    truncation: int | None = None,
    noise_tolerance: float = 1e-12,
) -> pd.DataFrame:
    """
    One ensemble per (interpretation, xi, alpha, amplitude^2) cell.

    amplitude selects the swept noise amplitude: "mu" (multiplicative) or
    "nu" (additive). truncation fixes the number of noise modes J for every
    cell; None picks J per xi from noise_tolerance. Cells whose ensemble
    fails stay in the table as a completed_fraction row of 0 with the error
    in the note column.

    Returns:
        pd.DataFrame: long-format table with SWEEP_COLUMNS.

    Raises:
        ConfigError: bad grids or worker count; never swallowed per cell.
    """
    if len(amplitude2_grid) == 0:
        raise ConfigError("the noise-intensity grid is empty", "MU2_GRID")
    if min(amplitude2_grid) < 0:
        raise ConfigError("noise intensities must be non-negative", "MU2_GRID")
    if amplitude not in ("mu", "nu"):
        raise ConfigError(f"amplitude must be 'mu' or 'nu', got {amplitude!r}", "AMPLITUDE")
    threads = get_default_threads() if threads is None else threads
    rows = []
    for interpretation in interpretations:
        for xi in xi_grid:
            for alpha in alpha_grid:
                for amp2 in amplitude2_grid:
                    model = replace(
                        base.model, alpha=alpha, interpretation=Interpretation(interpretation),
                        **{amplitude: math.sqrt(amp2)},
                    )
                    run_id = f"{base.run_id}-{Interpretation(interpretation).value[:3]}-a{alpha:g}-xi{xi:g}-{amplitude}2_{amp2:g}"
                    cell = {"amplitude2": amp2, "note": ""}
                    try:
                        noise = None
                        if model.is_noisy:
                            noise = build_noise_model(
                                base.grid.length, xi, truncation,
                                tolerance=noise_tolerance, max_modes=base.grid.n_points,
                            )
                        config = replace(base, model=model, noise=noise, run_id=run_id)
                        summary = run_ensemble(config, threads)
                        for row in results_rows(summary):
                            rows.append({**row, "xi": xi, **cell})
                    except ConfigError:
                        raise
                    except StochwaveError as e:
                        logger.warning(f"Sweep cell {run_id} failed: {e}")
                        rows.append({**failure_row(run_id, model, xi, base.master_seed, e), **cell, "note": str(e)})
    return pd.DataFrame(rows, columns=list(SWEEP_COLUMNS))
