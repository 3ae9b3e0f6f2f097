"""
trajectory_consumer.py

Read trajectory files back and recompute every speed estimator from the
stored history, so estimator settings (t0 in particular) can change
without re-running a simulation.

Estimators computed per record:

    lambda_min     time average of the instantaneous speed after t0
    lambda_gamma   OLS slope of the wave position after t0
    lambda_a/b/c   level-set secant speeds
    lambda_fit_a/b/c  level-set least-squares speeds

Frozen runs take lambda directly from the solved frame speed and the
position from gamma; free and fixed-speed runs difference the lab-frame
template shift.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
from __future__ import annotations

import json
import math
import pathlib
import struct
import sys

# Import external packages
import numpy as np
import pandas as pd

# Import functions from local modules
from producers.trajectory_producer import (
    END_MARKER,
    FRAME_COLUMNS,
    TRAJECTORY_MAGIC,
    TRAJECTORY_VERSION,
    TrajectoryRecord,
)
from stochwave.errors import (
    EstimatorError,
    TrajectoryCorruptError,
    TrajectoryFileError,
    TrajectoryVersionError,
)
from stochwave.wave_metrics import (
    LevelSetTrack,
    LevelConvention,
    ols_fit,
    speed_linfit,
    speed_secant,
    template_speed_series,
    time_average,
)
from utils.utils_config import get_default_out_dir
from utils.utils_logger import logger

ESTIMATOR_NAMES = (
    "lambda_min",
    "lambda_gamma",
    "lambda_a",
    "lambda_b",
    "lambda_c",
    "lambda_fit_a",
    "lambda_fit_b",
    "lambda_fit_c",
)

#####################################
# Reader
#####################################


def read_trajectory(path: pathlib.Path) -> TrajectoryRecord:
    """
    Read a file written by write_trajectory.

    Raises:
        TrajectoryVersionError: written by another format version.
        TrajectoryCorruptError: wrong magic, truncated blocks or missing end marker.
    """
    path = pathlib.Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise TrajectoryFileError(f"{path}: {e}") from e
    if data[:4] != TRAJECTORY_MAGIC:
        raise TrajectoryCorruptError(f"{path}: not a trajectory file")
    try:
        version, hlen = struct.unpack_from("<HI", data, 4)
        if version != TRAJECTORY_VERSION:
            raise TrajectoryVersionError(
                f"{path}: trajectory version {version}, this reader handles {TRAJECTORY_VERSION}"
            )
        offset = 10
        header = json.loads(data[offset:offset + hlen].decode("utf-8"))
        offset += hlen
        n_frames = header["n_frames"]
        n_snap = header["n_snapshots"]
        n_points = header["n_points"]
        blocks = []
        for count in (n_frames * len(FRAME_COLUMNS), n_snap, n_snap * n_points, n_points):
            blocks.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset).copy())
            offset += 8 * count
    except (struct.error, ValueError, KeyError, UnicodeDecodeError) as e:
        raise TrajectoryCorruptError(f"{path}: truncated or damaged trajectory ({e})") from e
    if data[offset:offset + 4] != END_MARKER:
        raise TrajectoryCorruptError(f"{path}: missing end marker")

    frames, snap_times, snaps, final = blocks
    return TrajectoryRecord(
        meta=header["meta"],
        frames=frames.reshape(n_frames, len(FRAME_COLUMNS)),
        snapshot_times=snap_times,
        snapshots=snaps.reshape(n_snap, n_points),
        final_profile=final,
        status=header["status"],
        status_step=header["status_step"],
        template_failed_at=header["template_failed_at"],
        multiple_roots=header["multiple_roots"],
    )


#####################################
# Estimators
#####################################


def default_t0(record: TrajectoryRecord) -> float:
    return 0.5 * float(record.meta["t_final"])


def speed_samples(record: TrajectoryRecord, t0: float) -> np.ndarray:
    """Instantaneous speeds on steps starting at or after t0."""
    times = record.times
    if record.meta.get("frozen"):
        lam = record.lam[1:]
    else:
        shift = record.shift
        lam = np.diff(shift) / np.diff(times)
    start = times[:-1] >= t0 - 1e-9 * max(1.0, abs(t0))
    lam = lam[start]
    return lam[np.isfinite(lam)]


def summarize_record(record: TrajectoryRecord, t0: float | None = None) -> dict:
    """
    Every estimator of one realization, plus width and lambda statistics.

    Missing estimators (template tracking stopped, level set absent,
    too few samples) are NaN.
    """
    t0 = default_t0(record) if t0 is None else float(t0)
    times = record.times
    out = {name: math.nan for name in ESTIMATOR_NAMES}

    try:
        if record.meta.get("frozen"):
            out["lambda_min"] = time_average(times[:-1], record.lam[1:], t0)
            keep = times >= t0
            out["lambda_gamma"], _ = ols_fit(times[keep], record.gamma[keep])
        elif np.all(np.isfinite(record.shift)):
            speeds = template_speed_series(times, record.shift, t0)
            out["lambda_min"] = speeds.lambda_min
            out["lambda_gamma"] = speeds.lambda_gamma
    except EstimatorError as e:
        logger.debug(f"Template estimators unavailable: {e}")

    conventions = {
        "a": LevelConvention.SUP_FROM_LEFT,
        "b": LevelConvention.SUP_FROM_RIGHT,
        "c": LevelConvention.SUP_FROM_LEFT,
    }
    for name, convention in conventions.items():
        track = LevelSetTrack(math.nan, convention, list(times), list(record.column(name)))
        try:
            out[f"lambda_{name}"] = speed_secant(track, t0).value
        except EstimatorError:
            pass
        try:
            out[f"lambda_fit_{name}"] = speed_linfit(track, t0).value
        except EstimatorError:
            pass

    lam = speed_samples(record, t0)
    widths = record.width[times >= t0]
    widths = widths[np.isfinite(widths)]
    full = speed_samples(record, times[0]) if times.size > 1 else np.empty(0)
    out["lambda_variance"] = float(np.var(lam, ddof=1)) if lam.size > 1 else math.nan
    out["lambda_full_sum"] = float(np.sum(full))
    out["lambda_full_count"] = int(full.size)
    out["width_mean"] = float(np.mean(widths)) if widths.size else math.nan
    return out


def running_lambda_min(record: TrajectoryRecord) -> pd.DataFrame:
    """lambda(t) and its running time average from t=0."""
    times = record.times
    lam = speed_samples(record, times[0]) if times.size > 1 else np.empty(0)
    t = times[1:1 + lam.size]
    running = np.cumsum(lam) / np.arange(1, lam.size + 1)
    return pd.DataFrame({"t": t, "lambda": lam, "lambda_min": running})


def replay(path: pathlib.Path, t0: float | None = None) -> dict:
    """Read a trajectory file and recompute its estimators."""
    record = read_trajectory(path)
    summary = summarize_record(record, t0)
    logger.info(f"Replayed {path}: status {record.status}, lambda_min={summary['lambda_min']:.6g}")
    return {"record": record, "estimates": summary}


#####################################
# Define main function for this module
#####################################


def main() -> None:
    """
    Summarize every trajectory file found in the output folder.
    """
    logger.info("START trajectory consumer.")
    folder = pathlib.Path(get_default_out_dir())
    paths = sorted(folder.glob("**/*.stwt"))
    if not paths:
        logger.warning(f"No trajectory files under {folder}.")
        sys.exit(0)
    for path in paths:
        try:
            replay(path)
        except TrajectoryFileError as e:
            logger.error(f"Cannot read {path}: {e}")
    logger.info("END trajectory consumer.")


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    main()
