"""
cli.py - command-line entry point.

    python -m stochwave.cli deterministic --config data/deterministic.conf
    python -m stochwave.cli ensemble --config data/multiplicative.conf --seed 7
    python -m stochwave.cli sweep --config data/sweep.conf --mu2 0,0.5,1
    python -m stochwave.cli replay results/trajectories/multiplicative-spde_r0000.stwt

Outputs are CSV/JSON files in --out-dir (default STW_OUT_DIR). Numbers
are written with 17 significant digits, so identical runs give
byte-identical files.

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 run failure.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
from __future__ import annotations

import argparse
import json
import math
import pathlib
import sys
from dataclasses import replace

# Import external packages
import pandas as pd

# Import functions from local modules
from consumers.trajectory_consumer import ESTIMATOR_NAMES, replay, running_lambda_min
from stochwave.ensemble import (
    RESULT_COLUMNS,
    SWEEP_COLUMNS,
    EnsembleSummary,
    RunKind,
    fixed_speed_ensemble,
    failure_row,
    from_run_config,
    lambda_histogram,
    results_rows,
    run_ensemble,
    sweep,
    weak_error,
)
from stochwave.errors import AllRealizationsFailedError, ConfigError, ModelError, StochwaveError
from stochwave.model import semi_implicit_tail_speed, theoretical_speed
from utils.utils_config import RunConfig, get_default_out_dir, load_run_config
from utils.utils_logger import logger

FLOAT_FORMAT = "%.17g"

#####################################
# Output Helpers
#####################################


def write_table(rows, path: pathlib.Path, columns=RESULT_COLUMNS) -> pathlib.Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows)
    frame = frame.reindex(columns=list(columns))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_profiles(summary: EnsembleSummary, path: pathlib.Path) -> pathlib.Path:
    frame = pd.DataFrame({
        "x": summary.x,
        "mean": summary.mean_profile,
        "aligned_mean": summary.aligned_mean_profile,
    })
    return write_table(frame, path, columns=frame.columns)


def write_json(payload: dict, path: pathlib.Path) -> pathlib.Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def theory_rows(config: RunConfig, run_id: str) -> list:
    """Predicted asymptotic speed next to the deterministic results.

    A tail-selected front also gets the speed of its initial tail under the
    time step actually used (theory_scheme), which is what the simulated
    front converges to at finite dt and dx.
    """
    try:
        prediction = theoretical_speed(config.alpha, config.k0)
    except ModelError as e:
        logger.warning(f"No speed prediction: {e}")
        return []
    base = {
        "run_id": run_id, "alpha": config.alpha, "nu": 0.0, "mu": 0.0, "xi": math.nan,
        "interpretation": config.interpretation, "std_error": math.nan, "width_mean": math.nan,
        "completed": 1, "blown_up": 0, "extinct": 0, "seed": config.seed,
    }
    rows = [{
        **base, "estimator": "theory_exact" if prediction.exact else "theory_lower_bound",
        "value": prediction.value,
    }]
    if prediction.regime == "tail-selected":
        try:
            value = semi_implicit_tail_speed(config.alpha, config.k0, config.dt, config.dx)
        except ModelError as e:
            logger.warning(f"No scheme tail speed: {e}")
        else:
            rows.append({**base, "estimator": "theory_scheme", "value": value})
    return rows


#####################################
# Subcommands
#####################################


def cmd_deterministic(config: RunConfig, out_dir: pathlib.Path, threads: int) -> list:
    """Free (PDE) and frozen (PDAE) deterministic runs with the predicted speed."""
    rows = []
    for kind in (RunKind.PDE, RunKind.PDAE):
        ensemble_config = from_run_config(
            replace(config, realizations=1, run_id=f"{config.run_id}-{kind.value}"), kind, out_dir
        )
        summary = run_ensemble(ensemble_config, threads)
        rows.extend(results_rows(summary))
    rows.extend(theory_rows(config, config.run_id))
    return [write_table(rows, out_dir / f"{config.run_id}_deterministic.csv")]


def cmd_ensemble(config: RunConfig, out_dir: pathlib.Path, threads: int) -> list:
    """Ensembles of every kind in ENSEMBLE_KINDS, in the listed order.

    A kind whose realizations all fail still gets a results row with its
    blown-up and extinct tallies; the first such failure is raised once the
    results table is written.
    """
    rows, written, summaries, failures = [], [], {}, []
    for name in config.ensemble_kinds:
        kind = RunKind(name)
        run_id = f"{config.run_id}-{kind.value}"
        ensemble_config = from_run_config(replace(config, run_id=run_id), kind, out_dir)
        try:
            if kind is RunKind.FIXED_SPEED:
                source = config.fixed_speed if config.fixed_speed is not None else config.speed_source
                summary = fixed_speed_ensemble(ensemble_config, source, summaries.get(RunKind.SPDAE), threads)
            else:
                summary = run_ensemble(ensemble_config, threads)
        except AllRealizationsFailedError as e:
            logger.error(f"{run_id}: {e}")
            xi = ensemble_config.noise.correlation_length if ensemble_config.noise is not None else math.nan
            rows.append(failure_row(run_id, ensemble_config.model, xi, ensemble_config.master_seed, e))
            failures.append(e)
            continue
        summaries[kind] = summary
        rows.extend(results_rows(summary))
        written.append(write_table(lambda_histogram(summary), out_dir / f"{run_id}_lambda_hist.csv",
                                   columns=("bin_left", "bin_right", "count")))
        written.append(write_profiles(summary, out_dir / f"{run_id}_mean_profile.csv"))
        per_realization = summary.per_realization
        written.append(write_table(per_realization, out_dir / f"{run_id}_realizations.csv",
                                   columns=per_realization.columns))

    written.insert(0, write_table(rows, out_dir / f"{config.run_id}_results.csv"))
    if RunKind.SPDE in summaries and RunKind.SPDAE in summaries:
        error = weak_error(summaries[RunKind.SPDAE], summaries[RunKind.SPDE])
        logger.info(f"Weak error SPDAE vs SPDE: {error:.6g}")
        written.append(write_json(
            {"weak_error": error, "realizations": config.realizations, "seed": config.seed, "t_final": config.t_final},
            out_dir / f"{config.run_id}_weak_error.json",
        ))
    if failures:
        raise failures[0]
    return written


def cmd_sweep(config: RunConfig, out_dir: pathlib.Path, threads: int) -> list:
    """Long-format table of speed and width against the noise intensity."""
    base = from_run_config(config, RunKind(config.run_kind), out_dir)
    table = sweep(
        base, config.mu2_grid, config.xi_grid, config.alpha_grid, config.interpretations,
        amplitude=config.amplitude, threads=threads, truncation=config.truncation,
        noise_tolerance=config.noise_tolerance,
    )
    return [write_table(table, out_dir / f"{config.run_id}_sweep.csv", columns=SWEEP_COLUMNS)]


def cmd_replay(path: pathlib.Path, out_dir: pathlib.Path, t0: float | None) -> list:
    """Recompute the estimators of a stored trajectory without re-simulating."""
    result = replay(path, t0)
    record, estimates = result["record"], result["estimates"]
    meta = record.meta
    noise = meta.get("noise") or {}
    base = {
        "run_id": meta["run_id"], "alpha": meta["model"]["alpha"], "nu": meta["model"]["nu"],
        "mu": meta["model"]["mu"], "xi": noise.get("xi", math.nan),
        "interpretation": meta["model"]["interpretation"], "std_error": math.nan,
        "width_mean": estimates["width_mean"], "completed": int(record.completed),
        "blown_up": int(record.status == "blown_up"), "extinct": int(record.status == "extinct"),
        "seed": meta["seed"],
    }
    rows = [
        {**base, "estimator": name, "value": estimates[name]}
        for name in ESTIMATOR_NAMES if math.isfinite(estimates[name])
    ]
    stem = pathlib.Path(path).stem
    return [
        write_table(rows, out_dir / f"{stem}_replay.csv"),
        write_table(running_lambda_min(record), out_dir / f"{stem}_series.csv",
                    columns=("t", "lambda", "lambda_min")),
    ]


#####################################
# Argument Parsing
#####################################


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochwave", description="Stochastic travelling waves: simulation and speed estimation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_config: bool = True):
        if with_config:
            p.add_argument("--config", type=pathlib.Path, required=True, help="run-config file (KEY=VALUE)")
            p.add_argument("--seed", type=int, help="override the master seed")
            p.add_argument("--realizations", type=int, help="override the realization count")
            p.add_argument("--threads", type=int, help="worker processes (default STW_THREADS)")
        p.add_argument("--out-dir", type=pathlib.Path, help="output folder (default STW_OUT_DIR)")
        p.add_argument("--t0", type=float, help="start of the estimator window (default T/2)")

    common(sub.add_parser("deterministic", help="free and frozen deterministic runs"))
    common(sub.add_parser("ensemble", help="Monte-Carlo ensembles"))
    sweep_parser = sub.add_parser("sweep", help="speed and width against noise intensity")
    common(sweep_parser)
    sweep_parser.add_argument("--mu2", type=_float_list, help="noise intensities, e.g. 0,0.25,1")
    sweep_parser.add_argument("--xi", type=_float_list, help="correlation lengths")
    sweep_parser.add_argument("--alpha", type=_float_list, help="nonlinearity parameters")
    replay_parser = sub.add_parser("replay", help="recompute estimators from a trajectory file")
    replay_parser.add_argument("trajectory", type=pathlib.Path)
    common(replay_parser, with_config=False)
    return parser


#####################################
# Define main function for this module
#####################################


def main(argv: list | None = None) -> int:
    """
    Main entry point.

    - Parses the subcommand and flags.
    - Loads and validates the run config (flags override file values).
    - Runs the subcommand and reports the files written.
    """
    args = build_parser().parse_args(argv)
    logger.info(f"START stochwave {args.command}.")
    out_dir = args.out_dir or pathlib.Path(get_default_out_dir())

    try:
        if args.command == "replay":
            written = cmd_replay(args.trajectory, out_dir, args.t0)
        else:
            overrides = {"seed": args.seed, "realizations": args.realizations, "t0": args.t0}
            if args.command == "sweep":
                overrides.update({"mu2_grid": args.mu2, "xi_grid": args.xi, "alpha_grid": args.alpha})
            config = load_run_config(args.config, overrides)
            commands = {"deterministic": cmd_deterministic, "ensemble": cmd_ensemble, "sweep": cmd_sweep}
            written = commands[args.command](config, out_dir, args.threads)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except StochwaveError as e:
        logger.error(f"Run failed: {e}")
        return 3
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        return 1

    for path in written:
        logger.info(f"Output: {path}")
    logger.info(f"END stochwave {args.command}.")
    return 0


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    sys.exit(main())
