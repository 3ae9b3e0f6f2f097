"""
test_config_cli.py - run-config files and the command-line subcommands.
"""

import json
import math

import pandas as pd
import pytest

from stochwave.cli import build_parser, main
from stochwave.errors import ConfigError
from stochwave.model import semi_implicit_tail_speed
from utils.utils_config import (
    RunConfig,
    get_default_out_dir,
    get_default_threads,
    load_run_config,
    save_run_config,
)

TINY = """\
# small stochastic run
RUN_ID=tiny
LENGTH=60
DX=0.2
T_FINAL=2
REALIZATIONS=2
SEED=3
MU=0.1
XI=0.5
ENSEMBLE_KINDS=spde,spdae
SNAPSHOT_STRIDE=10
"""


def write_config(tmp_path, text=TINY, extra="", name="tiny.conf"):
    path = tmp_path / name
    path.write_text(text + extra, encoding="utf-8")
    return path


class TestRunConfigFile:
    def test_values_and_defaults(self, tmp_path):
        config = load_run_config(write_config(tmp_path))
        assert config.run_id == "tiny"
        assert config.length == 60.0 and config.realizations == 2
        assert config.ensemble_kinds == ("spde", "spdae")
        assert config.alpha == -0.25
        assert config.t0 is None and config.resolved_t0 == 1.0
        assert config.resolved_x0 == pytest.approx(24.0)

    def test_save_then_load(self, tmp_path):
        original = RunConfig(
            run_id="round", mu=0.3, xi=0.25, t0=40.0, truncation=120, mirrored=False,
            mu2_grid=(0.0, 0.5), interpretations=("ito", "stratonovich"), fixed_speed=1.086,
        )
        assert load_run_config(save_run_config(original, tmp_path / "saved.conf")) == original

    def test_advection_key(self, tmp_path):
        assert load_run_config(write_config(tmp_path)).advection == "central"
        assert load_run_config(write_config(tmp_path, extra="ADVECTION=upwind\n")).advection == "upwind"

    def test_empty_optional_means_automatic(self, tmp_path):
        config = load_run_config(write_config(tmp_path, extra="T0=\nSCHEME=\n"))
        assert config.t0 is None and config.scheme is None

    def test_overrides_win(self, tmp_path):
        config = load_run_config(write_config(tmp_path), {"seed": 99, "realizations": None})
        assert config.seed == 99 and config.realizations == 2

    @pytest.mark.parametrize(
        "extra, key, line",
        [
            ("COLOUR=blue\n", "COLOUR", 12),
            ("REALIZATIONS=many\n", "REALIZATIONS", 12),
            ("alpha=0.1\n", "alpha", 12),
            ("MIRRORED=perhaps\n", "MIRRORED", 12),
            ("T0=5\n", "T0", 12),
        ],
    )
    def test_errors_name_key_and_line(self, tmp_path, extra, key, line):
        with pytest.raises(ConfigError) as info:
            load_run_config(write_config(tmp_path, extra=extra))
        assert info.value.key == key
        assert info.value.line == line
        assert f"key {key}" in str(info.value)

    def test_malformed_line(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_run_config(write_config(tmp_path, extra="this is not a setting\n"))
        assert info.value.line == 12

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.conf")

    @pytest.mark.parametrize("extra", [
        "DT=0\n", "WIDTH_DELTA=0.7\n", "AMPLITUDE=sigma\n", "EXTINCTION_PATIENCE=0\n",
        "ADVECTION=sideways\n", "BETA=-1\n",
    ])
    def test_range_checks(self, tmp_path, extra):
        with pytest.raises(ConfigError):
            load_run_config(write_config(tmp_path, extra=extra))


class TestEnvironment:
    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv("STW_THREADS", "3")
        assert get_default_threads() == 3

    def test_threads_must_be_an_integer(self, monkeypatch):
        monkeypatch.setenv("STW_THREADS", "many")
        with pytest.raises(ConfigError) as info:
            get_default_threads()
        assert info.value.key == "STW_THREADS"

    def test_out_dir_default(self, monkeypatch):
        monkeypatch.delenv("STW_OUT_DIR", raising=False)
        assert get_default_out_dir() == "results"


class TestParser:
    def test_sweep_lists(self):
        args = build_parser().parse_args(["sweep", "--config", "x.conf", "--mu2", "0,0.25,1"])
        assert args.mu2 == (0.0, 0.25, 1.0)

    def test_bad_list_exits(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["sweep", "--config", "x.conf", "--mu2", "a,b"])


class TestCommands:
    def test_ensemble_outputs_are_byte_identical(self, tmp_path):
        path = write_config(tmp_path)
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["ensemble", "--config", str(path), "--out-dir", str(first), "--threads", "1"]) == 0
        assert main(["ensemble", "--config", str(path), "--out-dir", str(second), "--threads", "2"]) == 0
        for name in ("tiny_results.csv", "tiny-spde_lambda_hist.csv", "tiny-spdae_mean_profile.csv",
                     "tiny-spde_realizations.csv", "tiny_weak_error.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_results_table(self, tmp_path):
        path = write_config(tmp_path)
        main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path), "--threads", "1"])
        table = pd.read_csv(tmp_path / "tiny_results.csv")
        assert set(table["run_id"]) == {"tiny-spde", "tiny-spdae"}
        assert (table["seed"] == 3).all()
        frozen_c = table[(table["run_id"] == "tiny-spdae") & (table["estimator"] == "lambda_c")]["value"].iloc[0]
        assert abs(frozen_c) < 0.1

    def test_seed_flag_changes_results(self, tmp_path):
        path = write_config(tmp_path)
        main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path / "a"), "--threads", "1"])
        main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path / "b"), "--threads", "1", "--seed", "4"])
        a = (tmp_path / "a" / "tiny_results.csv").read_bytes()
        b = (tmp_path / "b" / "tiny_results.csv").read_bytes()
        assert a != b

    def test_deterministic_table(self, tmp_path):
        path = write_config(tmp_path, extra="MU=0\n")
        assert main(["deterministic", "--config", str(path), "--out-dir", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "tiny_deterministic.csv")
        theory = table[table["estimator"] == "theory_exact"]["value"].iloc[0]
        assert theory == pytest.approx(1.06066, abs=1e-5)
        free = table[(table["run_id"] == "tiny-pde") & (table["estimator"] == "lambda_c")]["value"].iloc[0]
        assert free == pytest.approx(1.06, abs=0.05)

    def test_steep_front_gets_scheme_speed(self, tmp_path):
        path = write_config(tmp_path, extra="MU=0\nK0=0.1\n")
        assert main(["deterministic", "--config", str(path), "--out-dir", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "tiny_deterministic.csv").set_index("estimator")
        assert table.loc["theory_lower_bound", "value"] == pytest.approx(2.6)
        expected = semi_implicit_tail_speed(-0.25, 0.1, 0.05, 0.2)
        assert table.loc["theory_scheme", "value"] == pytest.approx(expected, rel=1e-12)

    def test_sweep_table(self, tmp_path):
        path = write_config(tmp_path, extra="REALIZATIONS=1\nT_FINAL=1\n")
        code = main(["sweep", "--config", str(path), "--out-dir", str(tmp_path), "--mu2", "0,0.01", "--threads", "1"])
        assert code == 0
        table = pd.read_csv(tmp_path / "tiny_sweep.csv")
        assert sorted(set(table["amplitude2"])) == [0.0, 0.01]

    def test_replay_reproduces_rows(self, tmp_path):
        path = write_config(tmp_path, extra="WRITE_TRAJECTORIES=true\nENSEMBLE_KINDS=spde\n")
        main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path), "--threads", "1"])
        trajectory = tmp_path / "trajectories" / "tiny-spde_r0001.stwt"
        assert main(["replay", str(trajectory), "--out-dir", str(tmp_path)]) == 0
        replayed = pd.read_csv(tmp_path / "tiny-spde_r0001_replay.csv").set_index("estimator")["value"]
        stored = pd.read_csv(tmp_path / "tiny-spde_realizations.csv").set_index("realization").loc[1]
        for name, value in replayed.items():
            assert value == stored[name]
        series = pd.read_csv(tmp_path / "tiny-spde_r0001_series.csv")
        assert list(series.columns) == ["t", "lambda", "lambda_min"]


class TestExitCodes:
    def test_unknown_key_is_config_error(self, tmp_path):
        path = write_config(tmp_path, extra="COLOUR=blue\n")
        assert main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path)]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["ensemble", "--config", str(tmp_path / "nope.conf"), "--out-dir", str(tmp_path)]) == 2

    def test_all_realizations_failed(self, tmp_path):
        path = write_config(tmp_path, extra="BLOWUP_THRESHOLD=0.5\n")
        assert main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path), "--threads", "1"]) == 3
        table = pd.read_csv(tmp_path / "tiny_results.csv")
        assert set(table["run_id"]) == {"tiny-spde", "tiny-spdae"}
        assert (table["estimator"] == "completed_fraction").all()
        assert (table["value"] == 0.0).all()
        assert (table["blown_up"] == 2).all() and (table["completed"] == 0).all()

    def test_bad_thread_setting_is_config_error(self, tmp_path, monkeypatch):
        monkeypatch.setenv("STW_THREADS", "many")
        path = write_config(tmp_path)
        assert main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path)]) == 2

    def test_truncated_trajectory(self, tmp_path):
        path = write_config(tmp_path, extra="WRITE_TRAJECTORIES=true\nENSEMBLE_KINDS=spde\nREALIZATIONS=1\n")
        main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path), "--threads", "1"])
        trajectory = tmp_path / "trajectories" / "tiny-spde_r0000.stwt"
        data = trajectory.read_bytes()
        trajectory.write_bytes(data[: len(data) - 100])
        assert main(["replay", str(trajectory), "--out-dir", str(tmp_path)]) == 3

    def test_bad_command_line(self):
        with pytest.raises(SystemExit) as info:
            main(["ensemble"])
        assert info.value.code == 2


def test_nan_free_weak_error(tmp_path):
    path = write_config(tmp_path)
    main(["ensemble", "--config", str(path), "--out-dir", str(tmp_path), "--threads", "1"])
    payload = json.loads((tmp_path / "tiny_weak_error.json").read_text())
    assert math.isfinite(payload["weak_error"])
    assert payload["seed"] == 3
