"""
test_ensemble.py - realization runs, ordered reductions and the averaged-speed protocol.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

import stochwave.ensemble as ensemble_module
from stochwave.ensemble import (
    SWEEP_COLUMNS,
    EnsembleConfig,
    RunKind,
    SpeedSource,
    estimator_stats,
    fixed_speed_ensemble,
    from_run_config,
    lambda_histogram,
    results_rows,
    run_ensemble,
    run_realization,
    speeds_from_prior,
    summarize_outcomes,
    sweep,
    weak_error,
)
from stochwave.errors import AllRealizationsFailedError, ConfigError, GridMismatchError, NoiseConfigError
from stochwave.grid_ops import Grid
from stochwave.model import ModelSpec
from stochwave.stepper import Advection, Status
from utils.utils_config import RunConfig


@pytest.fixture
def quiet_config(small_config):
    """Same set-up without noise."""
    return replace(small_config, model=ModelSpec(alpha=-0.25), noise=None)


class TestEnsembleConfig:
    def test_defaults(self, small_config):
        assert small_config.template == small_config.initial
        assert small_config.n_steps == 80
        assert small_config.resolved_t0 == 2.0
        assert small_config.rest_states == (1.0, 0.0)
        assert small_config.c0 == pytest.approx(1.0)

    def test_noisy_model_needs_noise(self, small_grid):
        with pytest.raises(NoiseConfigError):
            EnsembleConfig(grid=small_grid, model=ModelSpec(mu=0.1), run_kind=RunKind.SPDE)

    @pytest.mark.parametrize("kwargs", [{"realizations": 0}, {"t0": 10.0}, {"dt": 0.0}])
    def test_rejects_bad_values(self, small_grid, kwargs):
        with pytest.raises(ConfigError):
            EnsembleConfig(grid=small_grid, model=ModelSpec(), t_final=4.0, **kwargs)

    def test_from_run_config(self):
        rc = RunConfig(length=60.0, dx=0.2, mu=0.1, xi=0.5, realizations=3, seed=5, t_final=4.0)
        config = from_run_config(rc, "spdae")
        assert config.grid.n_points == 301
        assert config.run_kind is RunKind.SPDAE
        assert config.noise.modes_on(config.grid) <= config.grid.n_points
        assert config.initial.x0 == pytest.approx(24.0)
        assert config.resolved_t0 == 2.0
        assert config.trajectory_dir is None
        assert config.advection is Advection.CENTRAL
        assert config.describe()["advection"] == "central"

    def test_from_run_config_upwind_advection(self):
        config = from_run_config(RunConfig(length=60.0, dx=0.2, advection="upwind", t_final=4.0), "pdae")
        assert config.advection is Advection.UPWIND

    def test_from_run_config_wraps_numeric_errors(self):
        with pytest.raises(ConfigError):
            from_run_config(RunConfig(bc="periodic"))


class TestRealization:
    def test_zero_noise_spde_equals_pde(self, quiet_config):
        spde = run_realization(quiet_config, 0)
        pde = run_realization(replace(quiet_config, run_kind=RunKind.PDE), 0)
        np.testing.assert_array_equal(spde.final_profile, pde.final_profile)

    def test_zero_noise_spdae_equals_pdae(self, quiet_config):
        spdae = run_realization(replace(quiet_config, run_kind=RunKind.SPDAE), 0)
        pdae = run_realization(replace(quiet_config, run_kind=RunKind.PDAE), 0)
        np.testing.assert_array_equal(spdae.final_profile, pdae.final_profile)
        assert spdae.estimates["lambda_min"] == pdae.estimates["lambda_min"]

    def test_fixed_zero_speed_equals_free_run(self, small_config):
        free = run_realization(small_config, 1)
        fixed = run_realization(replace(small_config, run_kind=RunKind.FIXED_SPEED), 1, speed=0.0)
        np.testing.assert_array_equal(free.final_profile, fixed.final_profile)

    def test_deterministic_free_front_moves_right(self, quiet_config):
        outcome = run_realization(replace(quiet_config, run_kind=RunKind.PDE), 0)
        assert outcome.status is Status.DONE
        assert outcome.c_final == pytest.approx(24.0 + 4.0 * 1.06, abs=0.3)
        assert outcome.estimates["lambda_c"] == pytest.approx(1.06, abs=0.05)

    def test_frozen_front_stays_put(self, quiet_config):
        outcome = run_realization(replace(quiet_config, run_kind=RunKind.PDAE), 0)
        assert abs(outcome.c_final - 24.0) < 0.05
        assert outcome.estimates["lambda_min"] == pytest.approx(1.06, abs=0.04)

    def test_noise_stream_depends_on_index(self, small_config):
        a = run_realization(small_config, 0)
        b = run_realization(small_config, 1)
        assert not np.array_equal(a.final_profile, b.final_profile)

    def test_blow_up_is_reported(self, small_config):
        outcome = run_realization(replace(small_config, blowup_threshold=0.5), 0)
        assert outcome.status is Status.BLOWN_UP
        assert outcome.status_step == 1


class TestEnsemble:
    def test_independent_of_worker_count(self, small_config):
        serial = run_ensemble(small_config, threads=1)
        parallel = run_ensemble(small_config, threads=3)
        assert serial.per_realization.equals(parallel.per_realization)
        np.testing.assert_array_equal(serial.mean_profile, parallel.mean_profile)
        np.testing.assert_array_equal(serial.lambda_samples, parallel.lambda_samples)

    def test_same_seed_same_summary(self, small_config):
        a = run_ensemble(small_config, threads=1)
        b = run_ensemble(small_config, threads=1)
        assert a.per_realization.equals(b.per_realization)
        assert a.lambda_variance == b.lambda_variance

    def test_counts(self, small_config):
        summary = run_ensemble(small_config, threads=1)
        assert summary.realizations == 4
        assert summary.completed + summary.blown_up + summary.extinct == 4
        assert list(summary.per_realization["realization"]) == [0, 1, 2, 3]
        assert summary.width.count == summary.completed

    def test_partial_failures_are_tallied(self, small_config):
        done = [run_realization(small_config, i) for i in range(2)]
        failed = replace(done[1], index=2, status=Status.BLOWN_UP, status_step=5)
        summary = summarize_outcomes(small_config, done + [failed])
        assert summary.completed == 2 and summary.blown_up == 1
        assert summary.completed_fraction == pytest.approx(2.0 / 3.0)
        assert summary.estimators["lambda_c"].count == 2
        assert summary.estimators_all["lambda_c"].count == 3
        assert summary.failures == [(2, "blown_up", 5)]

    def test_all_failed(self, small_config):
        with pytest.raises(AllRealizationsFailedError) as info:
            run_ensemble(replace(small_config, blowup_threshold=0.5), threads=1)
        assert info.value.blown_up == 4

    def test_histogram_holds_every_sample(self, small_config):
        summary = run_ensemble(small_config, threads=1)
        hist = lambda_histogram(summary, bins=10)
        assert hist["count"].sum() == summary.lambda_samples.size
        assert len(hist) == 10

    def test_results_rows(self, small_config):
        summary = run_ensemble(small_config, threads=1)
        rows = results_rows(summary)
        names = [row["estimator"] for row in rows]
        assert names[-1] == "lambda_std"
        fraction = next(row for row in rows if row["estimator"] == "completed_fraction")
        assert fraction["value"] == 1.0
        assert "lambda_c" in names
        assert all(row["seed"] == 11 for row in rows)


class TestWeakError:
    def test_zero_against_itself(self, small_config):
        summary = run_ensemble(small_config, threads=1)
        assert weak_error(summary, summary) == 0.0

    def test_positive_between_free_and_frozen(self, small_config):
        free = run_ensemble(small_config, threads=1)
        frozen = run_ensemble(replace(small_config, run_kind=RunKind.SPDAE), threads=1)
        assert weak_error(frozen, free) > 0.0
        assert weak_error(frozen, free, aligned=False) > 0.0

    def test_grid_mismatch(self, small_config):
        summary = run_ensemble(small_config, threads=1)
        other = replace(summary, grid=Grid(60.0, 151))
        with pytest.raises(GridMismatchError):
            weak_error(summary, other)


class TestFixedSpeed:
    def test_numeric_speed(self, small_config):
        summary = fixed_speed_ensemble(small_config, 1.06, threads=1)
        assert summary.run_kind is RunKind.FIXED_SPEED
        assert summary.speed == pytest.approx(1.06)

    def test_zero_speed_is_plain_ensemble(self, small_config):
        fixed = fixed_speed_ensemble(small_config, 0.0, threads=1)
        plain = run_ensemble(small_config, threads=1)
        np.testing.assert_array_equal(fixed.mean_profile, plain.mean_profile)
        assert fixed.estimators["lambda_c"] == plain.estimators["lambda_c"]

    def test_frame_speed_holds_front(self, quiet_config):
        summary = fixed_speed_ensemble(replace(quiet_config, realizations=1), 1.06, threads=1)
        assert summary.estimators["lambda_c"].mean == pytest.approx(0.0, abs=0.05)

    @pytest.mark.parametrize("source", list(SpeedSource))
    def test_speeds_from_prior(self, small_config, source):
        prior = run_ensemble(replace(small_config, run_kind=RunKind.SPDAE), threads=1)
        speeds = speeds_from_prior(prior, source, 4)
        assert speeds.shape == (4,)
        assert np.all(np.isfinite(speeds))
        if source is SpeedSource.PER_REALIZATION:
            np.testing.assert_array_equal(speeds, prior.per_realization["lambda_min"].to_numpy())
        elif source is SpeedSource.ENSEMBLE_MEAN_TIME_AVERAGE:
            np.testing.assert_allclose(speeds, prior.estimators["lambda_min"].mean)
        else:
            np.testing.assert_allclose(speeds, prior.lambda_mean_full)

    def test_prior_pass_runs_when_missing(self, small_config):
        summary = fixed_speed_ensemble(small_config, "ensemble_mean_lambda", threads=1)
        assert summary.speed == pytest.approx(1.06, abs=0.2)


class TestSweep:
    def test_long_format_table(self, small_config):
        base = replace(small_config, realizations=2, t_final=1.0)
        table = sweep(base, (0.0, 0.04), (0.5,), (-0.25,), ("stratonovich", "ito"), threads=1)
        assert list(table.columns) == list(SWEEP_COLUMNS)
        assert set(table["amplitude2"]) == {0.0, 0.04}
        assert set(table["interpretation"]) == {"stratonovich", "ito"}
        noisy = table[table["amplitude2"] == 0.04]
        assert np.allclose(noisy["mu"], 0.2)

    def test_additive_amplitude(self, small_config):
        base = replace(small_config, realizations=1, t_final=1.0)
        table = sweep(base, (0.01,), (0.5,), (0.25,), ("stratonovich",), amplitude="nu", threads=1)
        assert np.allclose(table["nu"], 0.1)

    def test_failed_cells_are_annotated(self, small_config):
        base = replace(small_config, realizations=2, t_final=1.0, blowup_threshold=0.5)
        table = sweep(base, (0.01,), (0.5,), (-0.25,), ("stratonovich",), threads=1)
        assert len(table) == 1
        row = table.iloc[0]
        assert row["estimator"] == "completed_fraction"
        assert row["value"] == 0.0
        assert row["completed"] == 0
        assert "failed" in row["note"]
        assert row["blown_up"] == 2

    def test_truncation_reaches_every_cell(self, small_config, monkeypatch):
        calls = []
        original = ensemble_module.build_noise_model

        def recording(length, xi, truncation=None, **kwargs):
            calls.append(truncation)
            return original(length, xi, truncation, **kwargs)

        monkeypatch.setattr(ensemble_module, "build_noise_model", recording)
        base = replace(small_config, realizations=1, t_final=0.5)
        table = sweep(base, (0.01, 0.04), (0.5, 1.0), (-0.25,), ("stratonovich",), threads=1, truncation=40)
        assert calls == [40, 40, 40, 40]
        assert set(table["xi"]) == {0.5, 1.0}

    def test_bad_thread_setting_is_not_a_cell_failure(self, small_config, monkeypatch):
        monkeypatch.setenv("STW_THREADS", "many")
        with pytest.raises(ConfigError) as info:
            sweep(small_config, (0.01,), (0.5,), (-0.25,), ("stratonovich",))
        assert info.value.key == "STW_THREADS"

    @pytest.mark.parametrize("grid", [(), (-0.1, 0.2)])
    def test_rejects_bad_intensity_grid(self, small_config, grid):
        with pytest.raises(ConfigError):
            sweep(small_config, grid, (0.5,), (-0.25,), ("stratonovich",), threads=1)


class TestEstimatorStats:
    def test_ignores_nan(self):
        stats = estimator_stats([1.0, 3.0, math.nan])
        assert stats.mean == 2.0 and stats.count == 2
        assert stats.std_error == pytest.approx(math.sqrt(2.0) / math.sqrt(2.0))

    def test_empty(self):
        assert estimator_stats([math.nan]).count == 0
