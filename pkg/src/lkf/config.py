"""TOML run configuration for the command-line tool.

Sections: ``[model]``, ``[measure]``, optional ``[measure_minus]``,
``[problem]``, ``[solver]``, ``[limit]``, ``[scale]``, ``[mc]`` and ``[converge]``.
Infinite window ends are written as the strings ``"inf"`` / ``"-inf"``.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InputError
from .levy import FiniteActivityJumps, LevyModel
from .measures import PiecewiseConstant, RadonMeasureSpec, measure_from_config


class ConfigError(InputError):
    """Configuration file is unreadable or has a bad key."""

    def __init__(self, key: str, problem: str):
        self.key = key
        super().__init__(f"config key '{key}': {problem}")


_SECTIONS = {
    "model": {"sigma", "gamma", "jump_rate", "jump_mean"},
    "measure": {"atoms", "density", "window"},
    "measure_minus": {"atoms", "density", "window"},
    "problem": {"identity", "q", "x", "c", "b", "y", "f", "eta", "d_level", "kind", "base", "hi"},
    "solver": {"step", "apply_T"},
    "limit": {"growth_factor", "rel_tol", "abs_tol", "max_extensions", "max_nodes"},
    "scale": {"q", "lo", "hi", "step", "thetas"},
    "mc": {"n_paths", "seed", "euler_dt", "time_cap", "threshold", "identities", "bias_allowance"},
    "converge": {"n_values", "reps", "y", "T_hi", "seed"},
}


@dataclass
class RunConfig:
    model: LevyModel
    measure: RadonMeasureSpec
    measure_minus: Optional[RadonMeasureSpec] = None
    problem: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    limit: dict = field(default_factory=dict)
    scale: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)
    converge: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default: Any = None, required: bool = False, kind=float):
        table = getattr(self, section)
        if key not in table:
            if required:
                raise ConfigError(f"{section}.{key}", "missing")
            return default
        value = table[key]
        if kind is None:
            return value
        try:
            if kind is float:
                return _to_float(value)
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{section}.{key}", f"cannot interpret {value!r} as {kind.__name__}")


def _to_float(v) -> float:
    if isinstance(v, bool):
        raise ValueError
    if isinstance(v, str):
        return float(v.strip())
    return float(v)


def _model(sec: dict) -> LevyModel:
    try:
        sigma = _to_float(sec.get("sigma", 0.0))
    except (TypeError, ValueError):
        raise ConfigError("model.sigma", "not a number")
    try:
        gamma = _to_float(sec.get("gamma", 0.0))
    except (TypeError, ValueError):
        raise ConfigError("model.gamma", "not a number")
    has_rate, has_mean = "jump_rate" in sec, "jump_mean" in sec
    if has_rate != has_mean:
        missing = "model.jump_mean" if has_rate else "model.jump_rate"
        raise ConfigError(missing, "jump_rate and jump_mean must be given together")
    jumps = None
    if has_rate:
        try:
            jumps = FiniteActivityJumps(_to_float(sec["jump_rate"]), _to_float(sec["jump_mean"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError("model.jump_rate", str(exc))
    try:
        return LevyModel(sigma=sigma, gamma=gamma, jumps=jumps)
    except InputError as exc:
        key = "model.gamma" if sigma == 0 else "model.sigma"
        raise ConfigError(key, str(exc))


def _measure(name: str, sec: dict) -> RadonMeasureSpec:
    for key in ("atoms", "density"):
        if key in sec and not isinstance(sec[key], list):
            raise ConfigError(f"{name}.{key}", "must be an array of pairs")
    try:
        return measure_from_config(sec)
    except (InputError, TypeError, ValueError) as exc:
        bad = "atoms"
        msg = str(exc)
        if "density" in msg or "breakpoint" in msg:
            bad = "density"
        elif "window" in msg:
            bad = "window"
        raise ConfigError(f"{name}.{bad}", msg)


def parse_config(data: dict) -> RunConfig:
    for name, sec in data.items():
        if name not in _SECTIONS:
            raise ConfigError(name, "unknown section")
        if not isinstance(sec, dict):
            raise ConfigError(name, "must be a table")
        for key in sec:
            if key not in _SECTIONS[name]:
                raise ConfigError(f"{name}.{key}", "unknown key")
    if "model" not in data:
        raise ConfigError("model", "missing section")
    model = _model(data["model"])
    measure = _measure("measure", data.get("measure", {}))
    minus = _measure("measure_minus", data["measure_minus"]) if "measure_minus" in data else None
    if minus is not None and minus.window != measure.window:
        raise ConfigError("measure_minus.window", "must match measure.window")
    return RunConfig(
        model,
        measure,
        minus,
        dict(data.get("problem", {})),
        dict(data.get("solver", {})),
        dict(data.get("limit", {})),
        dict(data.get("scale", {})),
        dict(data.get("mc", {})),
        dict(data.get("converge", {})),
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path!r}: {exc.strerror}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("--config", f"TOML syntax error: {exc}")
    return parse_config(data)


def step_function(value, key: str):
    """A constant, or ``[[breakpoint, value], ...]`` as a step function."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, list):
        try:
            return PiecewiseConstant.from_pairs(value)
        except (InputError, TypeError, ValueError) as exc:
            raise ConfigError(key, str(exc))
    raise ConfigError(key, "must be a number or an array of [breakpoint, value] pairs")


def is_inf(v) -> bool:
    return isinstance(v, float) and math.isinf(v)
