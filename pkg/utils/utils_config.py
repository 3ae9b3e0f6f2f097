"""
utils_config.py - process settings and run-config files.

Process settings (worker count, output folder) come from environment
variables, optionally loaded from a .env file.

Experiment settings live in run-config files that use the same
KEY=VALUE format, for example:

    RUN_ID=multiplicative
    RUN_KIND=spde
    ALPHA=-0.25
    MU=0.1
    XI=0.1
    REALIZATIONS=100

Every key has a default; unknown keys and bad values are rejected with
the key and line number. Empty values mean "derive automatically" for
the optional keys (T0, X0, TEMPLATE_X0, TRUNCATION, SCHEME, FIXED_SPEED).
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
from __future__ import annotations

import math
import os
import pathlib
import re
import types
import typing
from dataclasses import dataclass, fields

# Import external packages
from dotenv import dotenv_values, load_dotenv

# Import functions from local modules
from stochwave.errors import ConfigError
from utils.utils_logger import logger

#####################################
# Load Environment Variables
#####################################

load_dotenv()

#####################################
# Getter Functions for .env Variables
#####################################


def get_default_threads() -> int:
    """Fetch the worker count from environment or use the CPU count."""
    raw = os.getenv("STW_THREADS")
    if raw:
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"STW_THREADS must be an integer, got {raw!r}", "STW_THREADS") from None
    else:
        threads = os.cpu_count() or 1
    logger.info(f"Worker threads: {threads}")
    return max(threads, 1)


def get_default_out_dir() -> str:
    """Fetch the output folder from environment or use default."""
    out_dir = os.getenv("STW_OUT_DIR", "results")
    logger.info(f"Output folder: {out_dir}")
    return out_dir


#####################################
# Run Configuration
#####################################


@dataclass(frozen=True)
class RunConfig:
    """Flat experiment description; attribute names are the lower-case keys."""

    run_id: str = "run"
    run_kind: str = "spde"
    ensemble_kinds: tuple = ("spde", "spdae")
    # grid
    length: float = 500.0
    dx: float = 0.1
    bc: str = "neumann"
    left_value: float = 1.0
    right_value: float = 0.0
    # time
    dt: float = 0.05
    t_final: float = 100.0
    t0: float | None = None
    # ensemble
    realizations: int = 100
    seed: int = 20240101
    # model
    alpha: float = -0.25
    nu: float = 0.0
    mu: float = 0.0
    interpretation: str = "stratonovich"
    scheme: str | None = None
    # noise
    xi: float = 0.1
    truncation: int | None = None
    noise_tolerance: float = 1e-12
    # fronts
    k0: float = 1.0 / math.sqrt(2.0)
    x0: float | None = None
    template_k: float = 1.0 / math.sqrt(2.0)
    template_x0: float | None = None
    mirrored: bool = True
    # numerics and diagnostics
    advection: str = "central"
    beta: float = 0.5
    level_offset: float = 0.01
    width_delta: float = 0.05
    snapshot_stride: int = 100
    blowup_threshold: float = 25.0
    extinction_patience: int = 10
    write_trajectories: bool = False
    dump_noise: bool = False
    # averaged-speed runs
    speed_source: str = "ensemble_mean_time_average"
    fixed_speed: float | None = None
    # sweeps
    mu2_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    xi_grid: tuple = (0.1,)
    alpha_grid: tuple = (-0.25,)
    interpretations: tuple = ("stratonovich",)
    amplitude: str = "mu"

    @property
    def resolved_t0(self) -> float:
        return 0.5 * self.t_final if self.t0 is None else self.t0

    @property
    def resolved_x0(self) -> float:
        return 0.4 * self.length if self.x0 is None else self.x0

    @property
    def resolved_template_x0(self) -> float:
        return self.resolved_x0 if self.template_x0 is None else self.template_x0


_TYPES = typing.get_type_hints(RunConfig)
_LIST_ITEM = {"ensemble_kinds": str, "mu2_grid": float, "xi_grid": float,
              "alpha_grid": float, "interpretations": str}
_KEY_LINE = re.compile(r"^\s*(?:export\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*=")


def _parse_scalar(kind, text: str, key: str, line: int | None):
    try:
        if kind is bool:
            lowered = text.strip().lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            value = float(text)
            if math.isnan(value):
                raise ValueError(text)
            return value
        return text.strip()
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as {kind.__name__}", key, line) from None


def _parse_value(name: str, text: str | None, key: str, line: int | None):
    if text is None:
        raise ConfigError("missing '='", key, line)
    hint = _TYPES[name]
    if name in _LIST_ITEM:
        items = [item for item in (p.strip() for p in text.split(",")) if item]
        return tuple(_parse_scalar(_LIST_ITEM[name], item, key, line) for item in items)
    optional = typing.get_origin(hint) in (typing.Union, types.UnionType)
    if optional:
        if text.strip() == "":
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    return _parse_scalar(hint, text, key, line)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def _key_lines(path: pathlib.Path) -> dict:
    lines = {}
    for number, text in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        match = _KEY_LINE.match(text)
        if match:
            lines[match.group(1)] = number
        elif text.strip() and not text.lstrip().startswith("#"):
            raise ConfigError(f"malformed line {text.strip()!r}", None, number)
    return lines


def load_run_config(path: pathlib.Path, overrides: dict | None = None) -> RunConfig:
    """
    Read a run-config file.

    Args:
        path (pathlib.Path): KEY=VALUE file.
        overrides (dict): attribute values applied after the file (CLI flags).

    Returns:
        RunConfig: validated configuration.

    Raises:
        ConfigError: unknown key, malformed line or unreadable value.
    """
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    lines = _key_lines(path)
    raw = dotenv_values(path, interpolate=False)
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for key, text in raw.items():
        name = key.lower()
        if key != key.upper() or name not in known:
            raise ConfigError("unknown key", key, lines.get(key))
        values[name] = _parse_value(name, text, key, lines.get(key))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = RunConfig(**values)
    validate_run_config(config, lines)
    logger.info(f"Loaded run config '{config.run_id}' from {path}")
    return config


def validate_run_config(config: RunConfig, lines: dict | None = None) -> None:
    """Range checks that do not need the numerical objects."""
    lines = lines or {}

    def fail(name: str, message: str):
        raise ConfigError(message, name.upper(), lines.get(name.upper()))

    for name in ("length", "dx", "dt", "t_final", "xi", "k0", "template_k"):
        if not getattr(config, name) > 0:
            fail(name, f"{name} must be positive")
    if config.realizations < 1:
        fail("realizations", "realizations must be at least 1")
    if not 0 <= config.resolved_t0 < config.t_final:
        fail("t0", "t0 must lie in [0, T_FINAL)")
    if not 0 < config.width_delta < 0.5:
        fail("width_delta", "width_delta must lie in (0, 1/2)")
    if not 0 < config.level_offset < 0.5:
        fail("level_offset", "level_offset must lie in (0, 1/2)")
    if config.snapshot_stride < 0:
        fail("snapshot_stride", "snapshot_stride must be non-negative")
    if config.extinction_patience < 1:
        fail("extinction_patience", "extinction_patience must be at least 1")
    if config.amplitude not in ("mu", "nu"):
        fail("amplitude", "amplitude must be 'mu' or 'nu'")
    if config.advection not in ("central", "upwind"):
        fail("advection", "advection must be 'central' or 'upwind'")
    if config.beta < 0:
        fail("beta", "beta must be non-negative")


def save_run_config(config: RunConfig, path: pathlib.Path) -> pathlib.Path:
    """Write every key; load_run_config(save_run_config(c)) == c."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{f.name.upper()}={_format_value(getattr(config, f.name))}" for f in fields(RunConfig)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Saved run config '{config.run_id}' to {path}")
    return path
