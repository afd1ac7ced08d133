"""Three independent integrators of the breathing-ring dynamics.

* ``dirac-rk4``: classical RK4 on the compiled Dirac-bracket vector field.
* ``rattle``: velocity Verlet on H_tot with the ring constraint enforced on
  positions (Newton) and its velocity companion on momenta (linear solve).
* ``penalty``: velocity Verlet on H_tot + (k/2) phi^2, no projection.

State layout everywhere: ``x (d), p (d), Q, P, q (N), pq (N)``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from ..constraints import ConstraintAnalysis, equations_of_motion
from ..symalg import SymbolicError, compile_exprs
from .bath import ModeSet, discretize_bath
from .model import BREATHING_RING, ModelSpec, SymbolicModel, state_header, state_variables

SCHEMES = ("dirac-rk4", "rattle", "penalty")
PROJECTION_TOL = 1e-12
NEWTON_CAP = 50
POLE_RADIUS2 = 1e-24
MAX_STEPS = 50_000_000


class IntegrationError(RuntimeError):
    pass


@dataclass
class InitialState:
    x: np.ndarray
    p: np.ndarray
    Q: float
    P: float
    q: np.ndarray
    pq: np.ndarray
    temperature: float = 0.0
    seed: int = 0

    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.p, [self.Q, self.P], self.q, self.pq]).astype(float)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    header: list[str]
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.header.index(name)]


def model_hash(spec: ModelSpec) -> str:
    return hashlib.sha256(spec.model_dump_json().encode()).hexdigest()[:16]


def sample_initial(spec: ModelSpec, x0, p0, T: float = 0.0, seed: int = 42) -> InitialState:
    """Place ``(x0, p0)`` on the constraint surface and draw a shifted Boltzmann bath.

    Q takes the positive branch ``|x0|``; P is the unique value satisfying the
    velocity-level constraint.
    """
    x0 = np.asarray(x0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if x0.shape != (spec.d,) or p0.shape != (spec.d,):
        raise ValueError(f"x0 and p0 must have length d={spec.d}")
    if T < 0:
        raise ValueError("temperature must be nonnegative")
    Q = math.sqrt(float(x0 @ x0))
    if Q == 0.0:
        raise ValueError("singular surface point: x0 = 0 forces Q = 0")
    P = spec.M * float(x0 @ p0) / (spec.m * Q)
    modes = discretize_bath(spec.bath)
    n = len(modes)
    rng = np.random.default_rng(seed)
    w, c, mb = modes.frequencies, modes.couplings, modes.masses
    mean_q = -c * Q / (mb * w ** 2) if n else np.zeros(0)
    q = mean_q + rng.standard_normal(n) * np.sqrt(T / (mb * w ** 2)) if n else np.zeros(0)
    pq = rng.standard_normal(n) * np.sqrt(mb * T) if n else np.zeros(0)
    if T == 0.0:
        q, pq = mean_q.copy(), np.zeros(n)
    return InitialState(x0, p0, Q, P, q, pq, T, seed)


class ConstrainedSystem:
    """Numeric side of a model: energies, forces and (optionally) the Dirac field."""

    def __init__(self, spec: ModelSpec, field=None):
        if not spec.environment:
            raise ValueError("numeric dynamics needs the collective coordinate")
        if spec.constraints is not None and [s.replace(" ", "") for s in spec.constraints] != [
                BREATHING_RING.replace(" ", "")]:
            raise ValueError("numeric dynamics supports only the ring constraint x.x - Q^2")
        self.spec = spec
        self.field = field
        self.modes: ModeSet = discretize_bath(spec.bath)
        d, n = spec.d, len(self.modes)
        self.d, self.n = d, n
        self.mass = np.concatenate([np.full(d, spec.m), [spec.M], self.modes.masses])
        self.header = ["x%d" % (i + 1) for i in range(d)] + ["p%d" % (i + 1) for i in range(d)] \
            + ["Q", "P"] + ["q%d" % (j + 1) for j in range(n)] + ["pq%d" % (j + 1) for j in range(n)]

    # state <-> (positions, momenta)
    def split(self, s):
        d, n = self.d, self.n
        pos = np.concatenate([s[:d], s[2 * d:2 * d + 1], s[2 * d + 2:2 * d + 2 + n]])
        mom = np.concatenate([s[d:2 * d], s[2 * d + 1:2 * d + 2], s[2 * d + 2 + n:]])
        return pos, mom

    def join(self, pos, mom):
        d, n = self.d, self.n
        return np.concatenate([pos[:d], mom[:d], pos[d:d + 1], mom[d:d + 1], pos[d + 1:], mom[d + 1:]])

    def potential(self, pos) -> float:
        sp, d = self.spec, self.d
        x, Q, qb = pos[:d], pos[d], pos[d + 1:]
        w, c, mb = self.modes.frequencies, self.modes.couplings, self.modes.masses
        return (sp.potential.value(x) + 0.5 * sp.M * sp.Omega ** 2 * Q * Q
                + float(np.sum(0.5 * mb * w ** 2 * qb ** 2 + c * Q * qb)))

    def force(self, pos) -> np.ndarray:
        sp, d = self.spec, self.d
        x, Q, qb = pos[:d], pos[d], pos[d + 1:]
        w, c, mb = self.modes.frequencies, self.modes.couplings, self.modes.masses
        gx = sp.potential.gradient(x)
        gQ = sp.M * sp.Omega ** 2 * Q + float(np.sum(c * qb))
        gq = mb * w ** 2 * qb + c * Q
        return -np.concatenate([gx, [gQ], gq])

    def constraint(self, pos) -> float:
        d = self.d
        return float(pos[:d] @ pos[:d]) - pos[d] ** 2

    def constraint_grad(self, pos) -> np.ndarray:
        d = self.d
        g = np.zeros_like(pos)
        g[:d] = 2 * pos[:d]
        g[d] = -2 * pos[d]
        return g

    # observables on full states (vectorized over rows)
    def energies(self, S):
        S = np.atleast_2d(S)
        sp, d, n = self.spec, self.d, self.n
        x, p = S[:, :d], S[:, d:2 * d]
        Q, P = S[:, 2 * d], S[:, 2 * d + 1]
        qb, pqb = S[:, 2 * d + 2:2 * d + 2 + n], S[:, 2 * d + 2 + n:]
        V = np.array([sp.potential.value(row) for row in x])
        hs = np.sum(p * p, axis=1) / (2 * sp.m) + V
        w, c, mb = self.modes.frequencies, self.modes.couplings, self.modes.masses
        collective = P * P / (2 * sp.M) + 0.5 * sp.M * sp.Omega ** 2 * Q * Q
        bath = np.sum(pqb ** 2 / (2 * mb) + 0.5 * mb * w ** 2 * qb ** 2 + c * Q[:, None] * qb, axis=1) \
            if n else np.zeros(len(S))
        return hs, collective, bath

    def phi_chi(self, S):
        S = np.atleast_2d(S)
        sp, d = self.spec, self.d
        x, p = S[:, :d], S[:, d:2 * d]
        Q, P = S[:, 2 * d], S[:, 2 * d + 1]
        phi = np.sum(x * x, axis=1) - Q * Q
        chi = 2 * np.sum(x * p, axis=1) / sp.m - 2 * Q * P / sp.M
        return phi, chi


def compile_eom(analysis: ConstraintAnalysis, model: SymbolicModel):
    """Numeric Dirac vector field ``f(state) -> d state/dt`` for the model's parameter values."""
    reg = model.registry
    variables = state_variables(reg)
    eom = equations_of_motion(analysis, variables)
    exprs = [model.bind_potential(eom[v]) for v in variables]
    fn = compile_exprs(exprs, variables, model.values)
    d = reg.dimension

    def field(s):
        if float(s[:d] @ s[:d]) < POLE_RADIUS2:
            raise IntegrationError("pole: trajectory reached x = 0")
        try:
            return fn(s)
        except SymbolicError as exc:
            raise IntegrationError(str(exc)) from exc

    field.exprs = exprs
    field.header = state_header(reg)
    return field


def _check(s, t):
    if not np.all(np.isfinite(s)):
        raise IntegrationError(f"non-finite state at t={t:.6g}")


def _steps(dt, t_final):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_final < dt:
        raise ValueError("t_final must be at least dt")
    n = int(round(t_final / dt))
    if abs(n * dt - t_final) > 1e-9 * t_final:
        n = int(math.floor(t_final / dt))
    return n


def _rk4(field, s0, dt, n):
    out = np.empty((n + 1, len(s0)))
    out[0] = s = np.array(s0, dtype=float)
    carry = np.zeros_like(s)  # compensated summation of the increments
    for k in range(n):
        k1 = field(s)
        k2 = field(s + 0.5 * dt * k1)
        k3 = field(s + 0.5 * dt * k2)
        k4 = field(s + dt * k3)
        inc = (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4) - carry
        t = s + inc
        carry = (t - s) - inc
        s = t
        _check(s, (k + 1) * dt)
        out[k + 1] = s
    return out


def _rattle(sys: ConstrainedSystem, s0, h, n, tol=PROJECTION_TOL, cap=NEWTON_CAP):
    out = np.empty((n + 1, len(s0)))
    out[0] = s0
    pos, mom = sys.split(np.array(s0, dtype=float))
    inv_m = 1.0 / sys.mass
    F = sys.force(pos)
    for k in range(n):
        G0 = sys.constraint_grad(pos)
        p_tilde = mom + 0.5 * h * F
        q_tilde = pos + h * p_tilde * inv_m
        direction = G0 * inv_m
        s = 0.0
        q_new = q_tilde
        for it in range(cap + 1):
            g = sys.constraint(q_new)
            if abs(g) <= tol * max(1.0, float(q_new[:sys.d] @ q_new[:sys.d])):
                break
            if it == cap:
                raise IntegrationError(f"position projection did not converge at step {k + 1}")
            slope = -float(sys.constraint_grad(q_new) @ direction)
            if slope == 0.0:
                raise IntegrationError("position projection hit a singular Jacobian")
            s -= g / slope
            q_new = q_tilde - s * direction
        p_half = p_tilde - (s / h) * G0
        pos = q_new
        if float(pos[:sys.d] @ pos[:sys.d]) < POLE_RADIUS2:
            raise IntegrationError("pole: trajectory reached x = 0")
        F = sys.force(pos)
        p_star = p_half + 0.5 * h * F
        G1 = sys.constraint_grad(pos)
        mu = float(G1 @ (p_star * inv_m)) / float(G1 @ (G1 * inv_m))
        mom = p_star - mu * G1
        state = sys.join(pos, mom)
        _check(state, (k + 1) * h)
        out[k + 1] = state
    return out


def _penalty(sys: ConstrainedSystem, s0, h, n, k_pen):
    out = np.empty((n + 1, len(s0)))
    out[0] = s0
    pos, mom = sys.split(np.array(s0, dtype=float))
    inv_m = 1.0 / sys.mass

    def force(q):
        return sys.force(q) - k_pen * sys.constraint(q) * sys.constraint_grad(q)

    F = force(pos)
    for k in range(n):
        mom = mom + 0.5 * h * F
        pos = pos + h * mom * inv_m
        if float(pos[:sys.d] @ pos[:sys.d]) < POLE_RADIUS2:
            raise IntegrationError("pole: trajectory reached x = 0")
        F = force(pos)
        mom = mom + 0.5 * h * F
        state = sys.join(pos, mom)
        _check(state, (k + 1) * h)
        out[k + 1] = state
    return out


def integrate(system: ConstrainedSystem, ic: InitialState, scheme: str, dt: float, t_final: float,
              k: float | None = None) -> Trajectory:
    """Integrate from ``ic`` on a uniform grid ``0, dt, ..., t_final``."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
    n = _steps(dt, t_final)
    if n * dt + dt == n * dt:
        raise IntegrationError("step underflow: dt is negligible relative to t_final")
    if n > MAX_STEPS:
        raise IntegrationError(f"{n} steps requested; the limit is {MAX_STEPS}")
    s0 = ic.vector()
    if len(s0) != len(system.header):
        raise ValueError("initial state does not match the model layout")
    if scheme == "dirac-rk4":
        if system.field is None:
            raise ValueError("dirac-rk4 needs a compiled Dirac field (see compile_eom)")
        states = _rk4(system.field, s0, dt, n)
    elif scheme == "rattle":
        states = _rattle(system, s0, dt, n)
    else:
        if k is None or k <= 0:
            raise ValueError("penalty scheme needs a positive stiffness k")
        states = _penalty(system, s0, dt, n, float(k))
    meta = {"scheme": scheme, "dt": dt, "t_final": n * dt, "seed": ic.seed,
            "model_hash": model_hash(system.spec)}
    if scheme == "penalty":
        meta["k"] = float(k)
    return Trajectory(dt * np.arange(n + 1), states, list(system.header), meta)
