"""Run configuration: JSON file plus flag overrides.

A config is a plain nested dict with a fixed schema; ``parse_config``
validates it field by field and reports problems with their full path
(e.g. ``quotes.half_spread must be >= 0``).  Flags override file values,
which override defaults.  ``RunConfig`` round-trips exactly through the
manifest written next to every output.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any

from .errors import ConfigError

COMMANDS = ("simulate", "impact", "filter-demo", "verify")
POLICIES = ("fixed", "mid-mean", "mid-argmax")
FILTERS = ("grid", "gaussian")
OUT_ENV_VAR = "QUOTEFILTER_OUT"


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters for one CLI run (defaults follow the base study)."""

    command: str = "verify"
    seed: int | None = None
    out: str = "."
    lambda0: float = 50.0
    a: float = 5.0
    sigma: float = 0.06
    mu: float = 0.0
    s0: float = 100.0
    half_spread: float = 0.1
    x0: float = 100.0
    sigma0: float = 0.05
    policy: str = "mid-mean"
    beta: float = 10.0
    horizon_T: float = 2.5
    horizon: float = 2.5
    replicas: int = 200
    filter_kind: str = "grid"
    grid_n: int = 4001
    dt: float | None = None
    w_clip_over_a: float | None = 3.0
    lam_min: float = 1e-8
    output_times: int = 26
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["horizon_T"]):
            d["horizon_T"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return parse_config(file_data=d)


# (file section, file key) -> (RunConfig field, converter, validator message)
_SCHEMA: dict[str, dict[str, str]] = {
    "": {
        "command": "command",
        "seed": "seed",
        "out": "out",
        "policy": "policy",
        "horizon": "horizon",
        "replicas": "replicas",
        "filter": "filter_kind",
        "output_times": "output_times",
        "workers": "workers",
    },
    "intensity": {"lambda0": "lambda0", "a": "a"},
    "model": {"sigma": "sigma", "mu": "mu", "s0": "s0"},
    "quotes": {"half_spread": "half_spread"},
    "prior": {"x0": "x0", "sigma0": "sigma0"},
    "meta": {"beta": "beta", "T": "horizon_T"},
    "grid": {"n": "grid_n", "dt": "dt"},
    "clip": {"w_clip_over_a": "w_clip_over_a", "lam_min": "lam_min"},
}

_FLAT_KEYS = {f.name for f in fields(RunConfig)}


def _as_float(path: str, value: Any, allow_inf: bool = False) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        value = math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {value!r}")
    v = float(value)
    if math.isinf(v) and not allow_inf:
        raise ConfigError(f"{path} must be finite, got {value!r}")
    return v


def _as_int(path: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer, got {value!r}")
    return value


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cfg.command!r}")
    if cfg.policy not in POLICIES:
        raise ConfigError(f"policy must be one of {POLICIES}, got {cfg.policy!r}")
    if cfg.filter_kind not in FILTERS:
        raise ConfigError(f"filter must be one of {FILTERS}, got {cfg.filter_kind!r}")
    if not cfg.lambda0 > 0:
        raise ConfigError("intensity.lambda0 must be > 0")
    if not cfg.a > 0:
        raise ConfigError("intensity.a must be > 0")
    if cfg.sigma < 0:
        raise ConfigError("model.sigma must be >= 0")
    if cfg.half_spread < 0:
        raise ConfigError("quotes.half_spread must be >= 0")
    if not cfg.sigma0 > 0:
        raise ConfigError("prior.sigma0 must be > 0")
    if cfg.beta < 0:
        raise ConfigError("meta.beta must be >= 0")
    if cfg.horizon_T < 0:
        raise ConfigError("meta.T must be >= 0")
    if not cfg.horizon > 0:
        raise ConfigError("horizon must be > 0")
    if math.isfinite(cfg.horizon_T) and cfg.horizon < cfg.horizon_T:
        raise ConfigError("horizon must be >= meta.T when meta.T is finite")
    if cfg.replicas < 1:
        raise ConfigError("replicas must be >= 1")
    if cfg.grid_n < 3:
        raise ConfigError("grid.n must be >= 3")
    if cfg.dt is not None and not cfg.dt > 0:
        raise ConfigError("grid.dt must be > 0 when given")
    if cfg.w_clip_over_a is not None and not cfg.w_clip_over_a > 0:
        raise ConfigError("clip.w_clip_over_a must be > 0 when given")
    if not cfg.lam_min > 0:
        raise ConfigError("clip.lam_min must be > 0")
    if cfg.output_times < 1:
        raise ConfigError("output_times must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.command in ("simulate", "impact") and cfg.seed is None:
        raise ConfigError(f"seed is mandatory for command {cfg.command!r}")
    return cfg


def _coerce(field_name: str, path: str, value: Any) -> Any:
    if value is None:
        return None
    if field_name in ("seed", "replicas", "grid_n", "output_times", "workers"):
        return _as_int(path, value)
    if field_name in ("command", "out", "policy", "filter_kind"):
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string, got {value!r}")
        return value
    return _as_float(path, value, allow_inf=(field_name == "horizon_T"))


def _flatten_file(data: dict) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SCHEMA[""]:
            out[_SCHEMA[""][key]] = _coerce(_SCHEMA[""][key], key, value)
        elif key in _SCHEMA and isinstance(value, dict):
            for sub, sub_value in value.items():
                if sub not in _SCHEMA[key]:
                    raise ConfigError(f"unknown field {key}.{sub}")
                name = _SCHEMA[key][sub]
                out[name] = _coerce(name, f"{key}.{sub}", sub_value)
        elif key in _FLAT_KEYS:
            # manifests store the flat form; accept it for exact round-trips
            out[key] = _coerce(key, key, value)
        else:
            raise ConfigError(f"unknown field {key}")
    return out


_FLAG_PATHS = {
    "lambda0": "intensity.lambda0",
    "a": "intensity.a",
    "sigma": "model.sigma",
    "mu": "model.mu",
    "s0": "model.s0",
    "half_spread": "quotes.half_spread",
    "x0": "prior.x0",
    "sigma0": "prior.sigma0",
    "beta": "meta.beta",
    "horizon_T": "meta.T",
    "grid_n": "grid.n",
    "dt": "grid.dt",
    "w_clip_over_a": "clip.w_clip_over_a",
    "lam_min": "clip.lam_min",
}


def parse_config(
    file: str | None = None,
    flags: dict[str, Any] | None = None,
    file_data: dict | None = None,
) -> RunConfig:
    """Build and validate a :class:`RunConfig`.

    Args:
        file: Path to a JSON config file.
        flags: Flag overrides, keyed by RunConfig field names; ``None``
            values are ignored.  Flags win over file values.
        file_data: Already-parsed config dict (used for manifests).

    Raises:
        ConfigError: On malformed JSON, unknown fields, bad types or
            out-of-range values; the message carries the field path.
    """
    merged: dict[str, Any] = {}
    if file is not None:
        try:
            with open(file, "r", encoding="utf-8") as fh:
                file_data = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config file {file}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {file} is not valid JSON: {e}") from e
    if file_data is not None:
        if not isinstance(file_data, dict):
            raise ConfigError("config root must be a JSON object")
        merged.update(_flatten_file(file_data))
    if flags:
        for name, value in flags.items():
            if value is None:
                continue
            if name not in _FLAT_KEYS:
                raise ConfigError(f"unknown flag {name}")
            merged[name] = _coerce(name, _FLAG_PATHS.get(name, name), value)
    if "out" not in merged:
        env_out = os.environ.get(OUT_ENV_VAR)
        if env_out:
            merged["out"] = env_out
    return _validate(RunConfig(**merged))
