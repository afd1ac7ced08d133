"""Model description and its symbolic / numeric realizations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..symalg import DERIVATIVE, Expr, PhaseSpaceRegistry, VariableId, differentiate, parse, substitute
from .bath import BathSpec, ModeSet, discretize_bath

BREATHING_RING = "dot(x,x) - Q^2"


class PotentialSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["free", "harmonic", "double-well"] = "free"
    k: float = Field(1.0, ge=0)
    a: float = Field(1.0, gt=0)
    b: float = Field(1.0, gt=0)

    @property
    def parameters(self) -> dict[str, float]:
        if self.kind == "harmonic":
            return {"k": self.k}
        if self.kind == "double-well":
            return {"a": self.a, "b": self.b}
        return {}

    @property
    def source(self) -> str:
        # double well: minima on the shell |x| = a, barrier b*a^4 at the origin
        return {"free": "0", "harmonic": "k/2*dot(x,x)", "double-well": "b*(dot(x,x) - a^2)^2"}[self.kind]

    @property
    def central(self) -> bool:
        return True

    def value(self, x: np.ndarray) -> float:
        r2 = float(x @ x)
        if self.kind == "harmonic":
            return 0.5 * self.k * r2
        if self.kind == "double-well":
            return self.b * (r2 - self.a ** 2) ** 2
        return 0.0

    def gradient(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "harmonic":
            return self.k * x
        if self.kind == "double-well":
            return 4.0 * self.b * (float(x @ x) - self.a ** 2) * x
        return np.zeros_like(x)


class ModelSpec(BaseModel):
    """Breathing-ring particle coupled to a Brownian-oscillator bath.

    ``constraints`` holds primary constraints as expression strings; ``None``
    means the ring constraint ``x.x - Q^2`` (or none without an environment).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    d: int = Field(2, ge=1)
    m: float = Field(1.0, gt=0)
    M: float = Field(1.0, gt=0)
    Omega: float = Field(1.0, ge=0)
    potential: PotentialSpec = PotentialSpec()
    bath: BathSpec = BathSpec()
    hbar: float = Field(1.0, gt=0)
    environment: bool = True
    constraints: Optional[list[str]] = None

    @model_validator(mode="after")
    def _bath_needs_environment(self):
        if not self.environment and self.bath.modes > 0:
            raise ValueError("a bath requires the collective coordinate (environment=true)")
        return self

    @property
    def primary_sources(self) -> list[str]:
        if self.constraints is not None:
            return list(self.constraints)
        return [BREATHING_RING] if self.environment else []


@dataclass
class SymbolicModel:
    spec: ModelSpec
    registry: PhaseSpaceRegistry
    H_S: Expr
    H_E: Expr
    primary: list[Expr]
    modes: ModeSet
    values: dict[VariableId, float] = field(default_factory=dict)
    concrete_V: Expr | None = None

    @property
    def H(self) -> Expr:
        return self.H_S + self.H_E

    def bind_potential(self, e: Expr) -> Expr:
        """Replace every derivative symbol of ``V`` by the closed-form partial of the chosen potential."""
        reg = self.registry
        if self.concrete_V is None:
            self.concrete_V = parse(self.spec.potential.source, reg)
        bindings = {}
        for v in e.free_variables():
            if v.kind != DERIVATIVE:
                continue
            fn, mi = reg.derivative_info(v)
            val = self.concrete_V
            for arg, count in zip(fn.args, mi):
                for _ in range(count):
                    val = differentiate(val, arg)
            bindings[v] = val
        return substitute(e, bindings) if bindings else e

    def point(self, state: np.ndarray) -> dict[VariableId, float]:
        """Full evaluation point (state slots plus parameter values)."""
        pt = dict(self.values)
        for v, val in zip(state_variables(self.registry), state):
            pt[v] = float(val)
        return pt


def state_variables(reg: PhaseSpaceRegistry) -> list[VariableId]:
    """Order of the state vector: x, p, Q, P, q, pq."""
    out = list(reg.x) + list(reg.p)
    if reg.environment:
        out += [reg.Q, reg.P]
    return out + list(reg.q) + list(reg.pq)


def state_header(reg: PhaseSpaceRegistry) -> list[str]:
    return [v.name for v in state_variables(reg)]


def bath_parameter_names(n: int) -> list[str]:
    return [f"{stem}{j + 1}" for stem in ("mb", "wb", "cb") for j in range(n)]


def build_symbolic(spec: ModelSpec, modes: int | None = None) -> SymbolicModel:
    """Registry, Hamiltonian pieces and primary constraints with an opaque ``V``.

    ``modes`` overrides the bath size used symbolically (the numeric mode
    values still come from ``spec.bath``).
    """
    n = spec.bath.modes if modes is None else modes
    params = ["m"]
    if spec.environment:
        params += ["M", "Omega"]
    params += ["hbar"] + list(spec.potential.parameters) + bath_parameter_names(n)
    reg = PhaseSpaceRegistry(spec.d, n, spec.environment, params)
    H_S = parse("dot(p,p)/(2*m) + V(x)", reg)
    if spec.environment:
        src = "P^2/(2*M) + M*Omega^2*Q^2/2"
        for j in range(1, n + 1):
            src += f" + pq{j}^2/(2*mb{j}) + mb{j}*wb{j}^2*q{j}^2/2 + cb{j}*Q*q{j}"
        H_E = parse(src, reg)
    else:
        H_E = Expr.const(reg, 0)
    primary = [parse(s, reg) for s in spec.primary_sources]

    modeset = discretize_bath(spec.bath) if n == spec.bath.modes else discretize_bath(
        spec.bath.model_copy(update={"modes": n}))
    values = {reg.param("m"): spec.m, reg.param("hbar"): spec.hbar}
    if spec.environment:
        values[reg.param("M")] = spec.M
        values[reg.param("Omega")] = spec.Omega
    for name, val in spec.potential.parameters.items():
        values[reg.param(name)] = val
    for j in range(n):
        values[reg.param(f"mb{j + 1}")] = float(modeset.masses[j])
        values[reg.param(f"wb{j + 1}")] = float(modeset.frequencies[j])
        values[reg.param(f"cb{j + 1}")] = float(modeset.couplings[j])
    return SymbolicModel(spec, reg, H_S, H_E, primary, modeset, values)
