"""Experiment configuration shared by the CLI and the convergence laboratory."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any

# keys that name output locations; they never enter a report
OUTPUT_KEYS = ("json_out", "csv_out", "dump_paths")


class ConfigError(ValueError):
    """Raised for unknown keys or values of the wrong type."""


@dataclass
class ExperimentConfig:
    command: str = "strong-rate"
    alpha: float = 1.5
    g: str = "cos"
    delta: float = 0.75
    eta: float = 1.0
    p: float = 2.0
    gamma: float = 1.0
    theorem: int = 1
    levels: list[int] = field(default_factory=lambda: [8, 16, 32, 64])
    n_ref: int | None = None
    T: float = 0.5
    K: int | None = None
    samples: int = 64
    seed: int = 7
    batch: int = 16
    oversample: int = 4
    ref_oversample: int = 2
    dt_control: bool = True
    frozen_diffusion: bool = False
    # single-level and operator commands
    n: int = 4
    method: str = "both"
    rel_tol: float = 1e-10
    t: float = 0.1
    t_grid: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.5])
    x: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75])
    y: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75])
    continuous: bool = False
    r: float = 0.5
    function: str = "x"
    eval_x: float = 1.0
    u0_modes: int = 4096
    # outputs
    json_out: str | None = None
    csv_out: str | None = None
    dump_paths: str | None = None

    @property
    def reference_level(self) -> int:
        return self.n_ref if self.n_ref is not None else 4 * max(self.levels)

    @property
    def steps(self) -> int:
        if self.K is not None:
            return self.K
        # dt = T * min(levels)**-alpha / 8
        return math.ceil(8 * min(self.levels) ** self.alpha - 1e-9)

    def echo(self) -> dict[str, Any]:
        """Configuration as recorded in reports (output paths removed)."""
        d = asdict(self)
        for key in OUTPUT_KEYS:
            d.pop(key)
        return d

    def dumps(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name: str, value):
    default = ExperimentConfig()
    ref = getattr(default, name)
    kind = _FIELDS[name].type
    if value is None:
        if "None" in str(kind):
            return None
        raise ConfigError(f"{name} may not be null")
    try:
        if isinstance(ref, bool):
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(ref, list):
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            elem = int if "int" in str(kind) else float
            return [elem(v) for v in value]
        if "int" in str(kind) and "float" not in str(kind):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if "float" in str(kind):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}") from None


def from_mapping(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in data.items()})


def parse_config(path: str | os.PathLike | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config file and apply flag overrides on top.

    An empty file is an empty mapping.  Keys not in :class:`ExperimentConfig`
    are rejected.
    """
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            text = fh.read()
        if text.strip():
            data = json.loads(text)
            if not isinstance(data, dict):
                raise ConfigError("config file must contain a JSON object")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return from_mapping(data)
