"""Run configuration: JSON with a required version tag, validated with pydantic."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dynamics.integrators import SCHEMES
from .dynamics.model import ModelSpec

CONFIG_VERSION = 1
MAX_SEED = 2 ** 64 - 1


class ConfigError(ValueError):
    """Unreadable, malformed or invalid configuration."""


class SimulateSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    schemes: list[Literal["dirac-rk4", "rattle", "penalty"]] = Field(default_factory=lambda: ["dirac-rk4"],
                                                                   min_length=1)
    dt: float = Field(1e-3, gt=0)
    t_final: float = Field(10.0, gt=0)
    seeds: list[int] = Field(default_factory=lambda: [42], min_length=1)
    penalty_k: list[float] = Field(default_factory=lambda: [1e4], min_length=1)
    x0: Optional[list[float]] = None
    p0: Optional[list[float]] = None
    temperature: float = Field(0.0, ge=0)

    @field_validator("seeds")
    @classmethod
    def _seed_range(cls, v):
        for s in v:
            if not 0 <= s <= MAX_SEED:
                raise ValueError(f"seed {s} is outside the unsigned 64-bit range")
        if len(set(v)) != len(v):
            raise ValueError("seeds must be distinct")
        return v

    @field_validator("penalty_k")
    @classmethod
    def _positive_k(cls, v):
        if any(k <= 0 for k in v):
            raise ValueError("penalty stiffness must be positive")
        return v

    @model_validator(mode="after")
    def _grid(self):
        if self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if self.x0 is not None and not any(self.x0):
            raise ValueError("x0 = 0 is a singular point of the constraint surface")
        return self


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    version: Literal[1]
    model: ModelSpec = ModelSpec()
    simulate: SimulateSpec = SimulateSpec()
    output: str = "output"

    @model_validator(mode="after")
    def _initial_state_shape(self):
        d = self.model.d
        for name in ("x0", "p0"):
            v = getattr(self.simulate, name)
            if v is not None and len(v) != d:
                raise ValueError(f"simulate.{name} must have length d={d}")
        return self

    def initial_vectors(self) -> tuple[list[float], list[float]]:
        """``x0`` and ``p0`` with the defaults ``e1`` and ``e2`` (``0`` when d = 1)."""
        d = self.model.d
        x0 = self.simulate.x0 or [1.0] + [0.0] * (d - 1)
        if self.simulate.p0 is not None:
            p0 = self.simulate.p0
        else:
            p0 = [0.0] * d
            if d > 1:
                p0[1] = 1.0
        return list(x0), list(p0)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    if "version" not in data:
        raise ConfigError('version: missing required field (expected "version": 1)')
    if data["version"] != CONFIG_VERSION:
        raise ConfigError(f"version: unrecognized version tag {data['version']!r} (expected 1)")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


def dump_config(cfg: RunConfig) -> str:
    """Canonical JSON with every default filled in."""
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def apply_overrides(cfg: RunConfig, *, output=None, seed=None, scheme=None, dt=None, t_final=None) -> RunConfig:
    """Command-line flags replace the corresponding config fields; the result is revalidated."""
    data = cfg.model_dump(mode="json")
    sim = data["simulate"]
    if output is not None:
        data["output"] = str(output)
    if seed is not None:
        sim["seeds"] = [seed]
    if scheme is not None:
        if scheme not in SCHEMES:
            raise ConfigError(f"simulate.schemes: unknown scheme {scheme!r}")
        sim["schemes"] = [scheme]
    if dt is not None:
        sim["dt"] = dt
    if t_final is not None:
        sim["t_final"] = t_final
    return parse_config(data)
