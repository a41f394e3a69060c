"""Run configuration: JSON schema, defaults, validation and hashing.

A config is a flat JSON object.  Unknown keys are rejected and every
field is checked against its type and range.  The hash is the SHA-256 of
the canonical JSON (sorted keys, compact separators, shortest round-trip
float repr), with the output directory left out so that the same run
written to two places hashes the same.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Any

import numpy as np

SCENARIOS = ("simulate", "meanfield", "stability", "hydro", "conservation", "massless", "distance")
SCHEMES = ("auto", "rk4", "split")
VORTEX_PRESETS = ("gaussian", "dipole", "ring", "mixed", "none")
SPRAY_PRESETS = ("gaussian", "mixed", "rotation", "uniform_flow", "rest", "none")
ROWS_PER_RUN = 20
HASH_EXCLUDED = ("out",)


class ConfigError(ValueError):
    """Schema or invariant violation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class SimConfig:
    scenario: str
    delta: float = 0.5
    epsilon: float = 1.0
    dt: float = 1e-3
    T: float = 1.0
    N: int = 0
    M: int = 0
    scheme: str = "auto"
    seed: int = 0
    vortex_preset: str = "gaussian"
    spray_preset: str = "gaussian"
    out: str = "."
    cadence: int | None = None
    # meanfield
    n_grid: tuple[int, ...] = (32, 64, 128)
    n_ref: int | None = None
    replicates: int = 1
    # stability
    eta: float = 1e-3
    # hydro
    radius: float = 0.25
    omega: float = 0.5
    duplicates: int = 2
    # conservation
    dt_levels: int = 3
    # massless
    eps_grid: tuple[float, ...] = (0.1, 0.025, 0.00625)
    a: str | None = None
    b: str | None = None

    def steps(self, dt: float | None = None) -> int:
        from .dynamics import n_steps_for

        return n_steps_for(self.T, self.dt if dt is None else dt)

    def cadence_for(self, dt: float | None = None) -> int:
        """Explicit cadence, else about ``ROWS_PER_RUN`` rows per run."""
        if self.cadence is not None:
            return self.cadence
        return max(1, self.steps(dt) // ROWS_PER_RUN)

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        for k in ("n_grid", "eps_grid"):
            d[k] = list(d[k])
        return d

    def hash(self) -> str:
        return config_hash(self)


_FIELDS = {f.name: f for f in fields(SimConfig)}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (_is_int(v) or isinstance(v, float)) and math.isfinite(v)


def _num(path, v, lo=None, strict=True) -> float:
    if not _is_num(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    v = float(v)
    if lo is not None and (v <= lo if strict else v < lo):
        raise ConfigError(path, f"must be {'>' if strict else '>='} {lo}, got {v!r}")
    return v


def _int(path, v, lo=None) -> int:
    if not _is_int(v):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}, got {v!r}")
    return v


def _choice(path, v, options) -> str:
    if v not in options:
        raise ConfigError(path, f"expected one of {list(options)}, got {v!r}")
    return v


def _opt_str(path, v):
    if v is not None and not isinstance(v, str):
        raise ConfigError(path, f"expected a string, got {v!r}")
    return v


def _list(path, v, item):
    if not isinstance(v, (list, tuple)) or len(v) == 0:
        raise ConfigError(path, "expected a nonempty list")
    return tuple(item(f"{path}[{i}]", x) for i, x in enumerate(v))


_CHECKS = {
    "scenario": lambda p, v: _choice(p, v, SCENARIOS),
    "delta": lambda p, v: _num(p, v, 0.0),
    "epsilon": lambda p, v: _num(p, v, 0.0),
    "dt": lambda p, v: _num(p, v, 0.0),
    "T": lambda p, v: _num(p, v, 0.0, strict=False),
    "N": lambda p, v: _int(p, v, 0),
    "M": lambda p, v: _int(p, v, 0),
    "scheme": lambda p, v: _choice(p, v, SCHEMES),
    "seed": lambda p, v: _seed(p, v),
    "vortex_preset": lambda p, v: _choice(p, v, VORTEX_PRESETS),
    "spray_preset": lambda p, v: _choice(p, v, SPRAY_PRESETS),
    "out": lambda p, v: _opt_str(p, v) or ".",
    "cadence": lambda p, v: None if v is None else _int(p, v, 1),
    "n_grid": lambda p, v: _list(p, v, lambda q, x: _int(q, x, 1)),
    "n_ref": lambda p, v: None if v is None else _int(p, v, 1),
    "replicates": lambda p, v: _int(p, v, 1),
    "eta": lambda p, v: _num(p, v, 0.0, strict=False),
    "radius": lambda p, v: _num(p, v, 0.0),
    "omega": lambda p, v: _num(p, v),
    "duplicates": lambda p, v: _int(p, v, 0),
    "dt_levels": lambda p, v: _int(p, v, 1),
    "eps_grid": lambda p, v: _list(p, v, lambda q, x: _num(q, x, 0.0)),
    "a": _opt_str,
    "b": _opt_str,
}


def _seed(path, v) -> int:
    v = _int(path, v, 0)
    if v >= 2**64:
        raise ConfigError(path, "must fit in 64 bits")
    return v


def validate(raw: dict[str, Any]) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("$", "config must be a JSON object")
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    if "scenario" not in raw:
        raise ConfigError("scenario", "required")
    clean = {k: _CHECKS[k](k, v) for k, v in raw.items()}
    return SimConfig(**clean)


def parse_value(text: str):
    """``--set`` values are JSON when they parse, plain strings otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config(path: str | None = None, overrides: dict[str, Any] | None = None, scenario: str | None = None) -> SimConfig:
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path!r}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"malformed JSON: {exc.msg} at line {exc.lineno}") from None
        if not isinstance(raw, dict):
            raise ConfigError("$", "config must be a JSON object")
    raw = dict(raw)
    if overrides:
        raw.update(overrides)
    if scenario is not None:
        if raw.get("scenario", scenario) != scenario:
            raise ConfigError("scenario", f"config says {raw['scenario']!r} but the subcommand is {scenario!r}")
        raw["scenario"] = scenario
    return validate(raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: SimConfig) -> str:
    d = {k: v for k, v in cfg.to_json().items() if k not in HASH_EXCLUDED}
    return hashlib.sha256(canonical_json(d).encode()).hexdigest()[:16]


def cell_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for a grid cell, keyed by (seed, *key)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))


def with_overrides(cfg: SimConfig, **kw) -> SimConfig:
    return validate({**cfg.to_json(), **kw})


__all__ = [
    "ConfigError",
    "SimConfig",
    "canonical_json",
    "cell_rng",
    "config_hash",
    "parse_config",
    "parse_value",
    "validate",
    "with_overrides",
]
