"""
trajectory_producer.py

Record the per-step history of one realization and write it as a
trajectory file.

A TrajectoryRecorder is handed to the stepper's run loop as its hook.
Every accepted state becomes one frame (t, lambda, gamma, template shift,
level sets a/b/c, width); every k-th state also keeps a full profile
snapshot.

Trajectory file layout (little endian):

    magic "STWT" | u16 version | u32 header length | header JSON (UTF-8)
    | n_frames * 8 float64     frames: t, lam, gamma, shift, a, b, c, width
    | n_snapshots float64      snapshot times
    | n_snapshots * M float64  snapshot profiles (full grid)
    | M float64                final profile
    | "END!"

The header carries grid, model, noise, dt, stride, status and the
counts needed to size the blocks.
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
from dataclasses import dataclass, field

# Import external packages
import numpy as np

# Import functions from local modules
from stochwave.errors import TemplateFitError
from stochwave.grid_ops import Grid, full_grid_derivative
from stochwave.stepper import SolverState, Status
from stochwave.wave_metrics import (
    LevelConvention,
    level_crossing,
    level_values,
    template_shift,
    wave_width,
)
from utils.utils_logger import logger

#####################################
# File Format Constants
#####################################

TRAJECTORY_MAGIC = b"STWT"
TRAJECTORY_VERSION = 1
END_MARKER = b"END!"

FRAME_COLUMNS = ("t", "lam", "gamma", "shift", "a", "b", "c", "width")

#####################################
# Trajectory Record
#####################################


@dataclass(eq=False)
class TrajectoryRecord:
    """History of one realization.

    shift is the template position in the lab frame (gamma + frame shift);
    level-set positions are relative to the computational frame.
    """

    meta: dict
    frames: np.ndarray
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    final_profile: np.ndarray
    status: str = Status.DONE.value
    status_step: int | None = None
    template_failed_at: float | None = None
    multiple_roots: int = 0

    def column(self, name: str) -> np.ndarray:
        return self.frames[:, FRAME_COLUMNS.index(name)]

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def lam(self) -> np.ndarray:
        return self.column("lam")

    @property
    def gamma(self) -> np.ndarray:
        return self.column("gamma")

    @property
    def shift(self) -> np.ndarray:
        return self.column("shift")

    @property
    def width(self) -> np.ndarray:
        return self.column("width")

    @property
    def completed(self) -> bool:
        return self.status == Status.DONE.value

    def header(self) -> dict:
        return {
            "meta": self.meta,
            "status": self.status,
            "status_step": self.status_step,
            "template_failed_at": self.template_failed_at,
            "multiple_roots": self.multiple_roots,
            "n_frames": int(self.frames.shape[0]),
            "n_snapshots": int(self.snapshot_times.size),
            "n_points": int(self.final_profile.size),
        }


#####################################
# Recording Hook
#####################################


class TrajectoryRecorder:
    """Turns solver states into frames.

    Args:
        grid: spatial grid.
        meta: run description stored in the file header.
        rest_states: (u_-, u_+) used for the level definitions.
        level_offset: epsilon of the a and b levels.
        width_delta: delta of the width levels.
        snapshot_stride: keep every k-th profile (0 keeps none).
        template: full-grid template samples; None disables template tracking.
        initial_shift: frame shift of the initial data relative to the template.
    """

    def __init__(
        self,
        grid: Grid,
        meta: dict,
        *,
        rest_states: tuple[float, float],
        level_offset: float,
        width_delta: float,
        snapshot_stride: int = 0,
        template: np.ndarray | None = None,
        initial_shift: float = 0.0,
    ):
        self.grid = grid
        self.meta = meta
        self.rest_states = rest_states
        self.levels = level_values(rest_states, level_offset)
        self.width_delta = width_delta
        self.snapshot_stride = snapshot_stride
        self.template = template
        self.template_derivative = None if template is None else full_grid_derivative(grid, template)
        self.frame_shift = initial_shift
        self.tracking = template is not None
        self.template_failed_at = None
        self.multiple_roots = 0
        self._frames = []
        self._snapshot_times = []
        self._snapshots = []
        self._last_profile = None

    def __call__(self, state: SolverState) -> None:
        if state.status is Status.BLOWN_UP:
            return
        u = self.grid.extend(state.u)
        self._last_profile = u

        shift = math.nan
        if self.tracking:
            try:
                fit = template_shift(
                    u, self.grid, self.template, self.frame_shift,
                    template_derivative=self.template_derivative,
                )
                self.frame_shift = fit.shift
                self.multiple_roots += int(fit.multiple_roots)
                shift = state.gamma + fit.shift
            except TemplateFitError as e:
                self.tracking = False
                self.template_failed_at = state.t
                logger.warning(f"Template tracking stopped at t={state.t:.4g}: {e}")

        a = level_crossing(u, self.grid, self.levels["a"], LevelConvention.SUP_FROM_LEFT)
        b = level_crossing(u, self.grid, self.levels["b"], LevelConvention.SUP_FROM_RIGHT)
        c = level_crossing(u, self.grid, self.levels["c"], LevelConvention.SUP_FROM_LEFT)
        width = wave_width(u, self.grid, self.width_delta, self.rest_states)
        self._frames.append((
            state.t, state.lam, state.gamma, shift,
            _nan(a), _nan(b), _nan(c), _nan(width),
        ))

        if self.snapshot_stride and state.step % self.snapshot_stride == 0:
            self._snapshot_times.append(state.t)
            self._snapshots.append(u)

    def finish(self, state: SolverState) -> TrajectoryRecord:
        """Freeze the recorded history together with the final status."""
        n = self.grid.n_points
        final = self._last_profile if self._last_profile is not None else np.full(n, np.nan)
        frames = np.asarray(self._frames, dtype=float).reshape(-1, len(FRAME_COLUMNS))
        snapshots = np.asarray(self._snapshots, dtype=float).reshape(-1, n)
        return TrajectoryRecord(
            meta=self.meta,
            frames=frames,
            snapshot_times=np.asarray(self._snapshot_times, dtype=float),
            snapshots=snapshots,
            final_profile=np.asarray(final, dtype=float),
            status=state.status.value,
            status_step=state.status_step,
            template_failed_at=self.template_failed_at,
            multiple_roots=self.multiple_roots,
        )


def _nan(value: float | None) -> float:
    return math.nan if value is None else value


#####################################
# Writer
#####################################


def write_trajectory(path: pathlib.Path, record: TrajectoryRecord) -> pathlib.Path:
    """
    Serialize a record to the versioned binary trajectory format.

    Args:
        path (pathlib.Path): destination file; parent folders are created.
        record (TrajectoryRecord): the history to write.

    Returns:
        pathlib.Path: the written path.
    """
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(record.header(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(TRAJECTORY_MAGIC)
        fh.write(struct.pack("<HI", TRAJECTORY_VERSION, len(header)))
        fh.write(header)
        for block in (record.frames, record.snapshot_times, record.snapshots, record.final_profile):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
        fh.write(END_MARKER)
    logger.info(f"Wrote trajectory ({record.frames.shape[0]} frames, status {record.status}) to {path}")
    return path
