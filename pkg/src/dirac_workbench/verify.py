"""Acceptance checklist for the breathing-ring workbench.

Expected symbolic forms are kept as expression strings and parsed at run
time against the registry of the model under test, so the golden data can be
read and audited directly.
"""
from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constraints import ConstraintError, equations_of_motion, multiplier_route, poisson
from .dynamics import ModelSpec, analyze_model, integrate, make_system, measure, sample_initial
from .dynamics.integrators import ConstrainedSystem
from .quantize import (commutator, heavy_collective_limit, jacobi_expression, jacobi_residual,
                       noncommutativity_witness)
from .symalg import Expr, evaluate, parse, to_string

log = logging.getLogger(__name__)

SECONDARY = "2*dot(x,p)/m - 2*Q*P/M"
C12 = "4*(dot(x,x)/m + Q^2/M)"
CORRUPTED_RING = "dot(x,x) - 2*Q^2"

# (left, right, coefficient of i*hbar); {i} and {j} range over 1..d, {delta} is 1 when i == j
COMMUTATOR_FORMS = [
    ("x{i}", "x{j}", "0"),
    ("x{i}", "p{j}", "{delta} - (M/(m+M))*x{i}*x{j}/dot(x,x)"),
    ("p{i}", "p{j}", "-(M/(m+M))*(x{i}*p{j} - x{j}*p{i})/dot(x,x)"),
    ("Q", "P", "M/(m+M)"),
    ("Q", "x{i}", "0"),
    ("Q", "p{i}", "(m/(m+M))*(x{i}/dot(x,x))*Q"),
    ("P", "x{i}", "-(M/(m+M))*x{i}/Q"),
    ("P", "p{i}", "(m*x{i}*P - M*Q*p{i})/((m+M)*dot(x,x))"),
]
RIGID_FORMS = [("x{i}", "p{j}", "{delta} - x{i}*x{j}/dot(x,x)"), ("Q", "P", "1")]
SYMBOLIC_DIMENSIONS = (2, 3)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    seconds: float
    limit: float
    measured: dict = field(default_factory=dict)
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" - {self.detail}" if self.detail else ""
        return f"[{status}] {self.number:2d} {self.name} ({self.seconds:.2f}s / {self.limit:g}s){extra}"

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "limit_seconds": self.limit, "measured": self.measured, "detail": self.detail}


def _ring_model(base: ModelSpec, **update) -> ModelSpec:
    return ModelSpec.model_validate({**base.model_dump(), **update})


def _surface_points(sm, n, seed=42):
    """Random points on both constraints (positive Q branch) with model parameter values."""
    spec = sm.spec
    rng = np.random.default_rng(seed)
    nb = len(sm.registry.q)
    pts = []
    while len(pts) < n:
        x = rng.standard_normal(spec.d)
        if x @ x < 1e-2:
            continue
        p = rng.standard_normal(spec.d)
        Q = float(np.sqrt(x @ x))
        P = spec.M * float(x @ p) / (spec.m * Q)
        bath = rng.standard_normal(2 * nb)
        pts.append(sm.point(np.concatenate([x, p, [Q, P], bath])))
    return pts


# -- symbolic checks --------------------------------------------------------

def check_secondary(base: ModelSpec) -> tuple[bool, dict, str]:
    sm, an = analyze_model(base)
    reg = sm.registry
    cons = an.constraints
    secondary = [c for c in cons if c.generation > 0]
    measured = {"constraints": [to_string(c.expr) for c in cons], "classes": [c.cls for c in cons]}
    if len(secondary) != 1:
        return False, measured, f"expected one secondary constraint, found {len(secondary)}"
    ratio = secondary[0].expr / parse(SECONDARY, reg)
    measured["ratio_to_expected"] = to_string(ratio)
    if not ratio.is_constant() or ratio.is_zero():
        return False, measured, f"secondary {to_string(secondary[0].expr)} is not a constant multiple of {SECONDARY}"
    if len(cons) != 2 or not an.second_class:
        return False, measured, "constraint set is not a second-class pair"
    return True, measured, ""


def check_matrix(base: ModelSpec) -> tuple[bool, dict, str]:
    sm, an = analyze_model(base)
    reg = sm.registry
    phi, chi = an.constraints[0].expr, an.constraints[1].expr
    # rescale the discovered secondary to the reference normalization
    scale = chi / parse(SECONDARY, reg)
    value = poisson(phi, chi) / scale
    expected = parse(C12, reg)
    ok = value == expected
    return ok, {"C12": to_string(value)}, "" if ok else f"C12 = {to_string(value)}, expected {C12}"


def _mismatches(base: ModelSpec, forms, transform: Callable | None = None, first_only=True):
    """Compare table entries against parsed forms for every dimension in SYMBOLIC_DIMENSIONS."""
    out = []
    for d in sorted({base.d, *SYMBOLIC_DIMENSIONS} - {1}):
        sm, an = analyze_model(_ring_model(base, d=d))
        reg = sm.registry
        for left, right, rhs in forms:
            need_j = "{j}" in left + right
            need_i = "{i}" in left + right
            for i in range(1, d + 1) if need_i else [None]:
                for j in range(1, d + 1) if need_j else [None]:
                    fmt = {"i": i, "j": j, "delta": int(i == j)}
                    ln, rn = left.format(**fmt), right.format(**fmt)
                    if ln == rn:
                        continue
                    a, b = parse(ln, reg), parse(rn, reg)
                    got = commutator(a, b, an)
                    if transform is not None:
                        got = transform(got, an)
                    want = parse(rhs.format(**fmt), reg)
                    if not an.reducer.is_weakly_zero(got - want):
                        out.append({"d": d, "entry": f"[{ln}, {rn}]", "got": to_string(got),
                                    "expected": to_string(want)})
                        if first_only:
                            return out
    return out


def check_table(base: ModelSpec) -> tuple[bool, dict, str]:
    bad = _mismatches(base, COMMUTATOR_FORMS, first_only=False)
    measured = {"dimensions": sorted({base.d, *SYMBOLIC_DIMENSIONS} - {1}), "mismatches": bad}
    if not bad:
        return True, measured, ""
    m = bad[0]
    return False, measured, (f"first mismatch {m['entry']} (d={m['d']}): got {m['got']}, "
                             f"expected {m['expected']}; {len(bad)} mismatching entries")


def check_witness(base: ModelSpec) -> tuple[bool, dict, str]:
    spec = _ring_model(base, potential={"kind": "harmonic", "k": base.potential.k})
    sm, an = analyze_model(spec)
    w = noncommutativity_witness(an)
    bound = sm.bind_potential(w.value)
    values = [evaluate(bound, pt) for pt in _surface_points(sm, 10)]
    smallest = min(abs(v) for v in values)
    ok = w.nonzero and smallest > 1e-12
    return ok, {"symbolic": to_string(w.value), "min_abs_value": smallest}, \
        "" if ok else "witness vanishes (weakly or numerically)"


def check_jacobi(base: ModelSpec) -> tuple[bool, dict, str]:
    spec = _ring_model(base, d=2, potential={"kind": "harmonic", "k": base.potential.k})
    sm, an = analyze_model(spec)
    reg = sm.registry
    basis = [Expr.var(reg, v) for v in list(reg.x) + list(reg.p) + [reg.Q, reg.P]]
    zero = Expr.const(reg, 0)
    failed = []
    for f, g, h in itertools.combinations(basis, 3):
        if not an.reducer.is_weakly_zero(sum(jacobi_expression(f, g, h, an), zero)):
            failed.append(f"({f}, {g}, {h})")
    pts = _surface_points(sm, 100)
    worst = 0.0
    for g, h in itertools.combinations(basis, 2):
        res = jacobi_residual(sm.H, g, h, an, pts, bind=sm.bind_potential)
        worst = max(worst, float(np.nanmax(res)))
    ok = not failed and worst <= 1e-9
    detail = ""
    if failed:
        detail = f"symbolic Jacobi fails for {failed[0]}"
    elif worst > 1e-9:
        detail = f"numeric residual {worst:.3e} exceeds 1e-9"
    return ok, {"symbolic_failures": failed, "max_numeric_residual": worst}, detail


def check_dual_route(base: ModelSpec) -> tuple[bool, dict, str]:
    sm, an = analyze_model(base)
    reg = sm.registry
    bad = []
    for v, e in equations_of_motion(an).items():
        alt = multiplier_route(an, Expr.var(reg, v))
        if not an.reducer.is_weakly_zero(e - alt):
            bad.append(v.name)
    return not bad, {"variables": len(reg.phase_variables), "mismatched": bad}, \
        "" if not bad else f"routes disagree for {', '.join(bad)}"


def check_rigid_limit(base: ModelSpec) -> tuple[bool, dict, str]:
    bad = _mismatches(base, RIGID_FORMS, transform=heavy_collective_limit)
    if not bad:
        return True, {}, ""
    m = bad[0]
    return False, {"mismatches": bad}, f"{m['entry']}: limit {m['got']}, expected {m['expected']}"


def check_negative_control(base: ModelSpec) -> tuple[bool, dict, str]:
    corrupted = _ring_model(base, constraints=[CORRUPTED_RING])
    try:
        ok, measured, detail = check_table(corrupted)
    except ConstraintError as exc:
        return False, {}, f"corrupted model did not reach the table check: {exc}"
    named = bool(measured["mismatches"])
    passed = (not ok) and named
    return passed, {"table_check_failed": not ok, "first_mismatch": measured["mismatches"][:1]}, \
        detail if passed else "corrupted constraint was not detected"


# -- dynamics checks ----------------------------------------------------------

FREE = ModelSpec(Omega=0.0)
HARMONIC = ModelSpec(potential={"kind": "harmonic", "k": 1.0})
X0, P0 = [1.0, 0.0], [0.0, 1.0]


def _sup(a, b) -> float:
    return float(np.max(np.abs(a - b)))


def check_conservation() -> tuple[bool, dict, str]:
    sys_ = make_system(FREE)
    ic = sample_initial(FREE, X0, P0)
    coarse = measure(integrate(sys_, ic, "dirac-rk4", 1e-3, 10.0), sys_)
    fine = measure(integrate(sys_, ic, "dirac-rk4", 5e-4, 10.0), sys_)
    drift = coarse.relative_energy_drift()
    max_phi = float(np.max(np.abs(coarse.phi)))
    e1, e2 = abs(coarse.phi[-1] - coarse.phi[0]), abs(fine.phi[-1] - fine.phi[0])
    ratio = float(e1 / e2) if e2 > 0 else float("inf")
    measured = {"energy_drift": drift, "max_abs_phi": max_phi, "end_phi_dt": float(e1),
                "end_phi_dt_half": float(e2), "ratio": ratio}
    problems = []
    if drift > 1e-6:
        problems.append(f"energy drift {drift:.3e}")
    if max_phi > 1e-6:
        problems.append(f"max|phi| {max_phi:.3e}")
    if not 8 <= ratio <= 32:
        problems.append(f"halving ratio {ratio:.3g} outside [8, 32]")
    return not problems, measured, "; ".join(problems)


def check_schemes() -> tuple[bool, dict, str]:
    sys_ = make_system(FREE)
    ic = sample_initial(FREE, X0, P0)
    rk = integrate(sys_, ic, "dirac-rk4", 1e-3, 10.0)
    ra = integrate(sys_, ic, "rattle", 1e-3, 10.0)
    gap = _sup(rk.states, ra.states)
    max_phi = float(np.max(np.abs(measure(ra, sys_).phi)))
    ok = gap <= 1e-4 and max_phi <= 1e-8
    return ok, {"sup_gap": gap, "rattle_max_abs_phi": max_phi}, \
        "" if ok else f"gap {gap:.3e}, rattle max|phi| {max_phi:.3e}"


def check_penalty() -> tuple[bool, dict, str]:
    measured = {}
    problems = []
    for label, spec in (("free", FREE), ("harmonic", HARMONIC)):
        sys_ = ConstrainedSystem(spec)
        ic = sample_initial(spec, X0, P0, seed=42)
        ref = integrate(sys_, ic, "rattle", 1e-3, 5.0)
        gaps = [_sup(integrate(sys_, ic, "penalty", 1e-3, 5.0, k=k).states, ref.states)
                for k in (1e2, 1e3, 1e4)]
        measured[label] = gaps
        if not (gaps[0] > gaps[1] > gaps[2]):
            problems.append(f"{label}: gaps {gaps} not strictly decreasing")
    return not problems, measured, "; ".join(problems)


def check_bath() -> tuple[bool, dict, str]:
    spec = ModelSpec(bath={"eta": 0.0, "modes": 16})
    sys_ = make_system(spec)
    ic = sample_initial(spec, X0, P0, T=1.0, seed=42)
    tr = integrate(sys_, ic, "dirac-rk4", 1e-3, 10.0)
    w, mb = sys_.modes.frequencies, sys_.modes.masses
    n, d = len(w), spec.d
    t = tr.times[-1]
    q_exact = ic.q * np.cos(w * t) + ic.pq / (mb * w) * np.sin(w * t)
    p_exact = ic.pq * np.cos(w * t) - mb * w * ic.q * np.sin(w * t)
    q_num = tr.states[-1, 2 * d + 2:2 * d + 2 + n]
    p_num = tr.states[-1, 2 * d + 2 + n:]
    angle = np.arctan2(-p_num / (mb * w), q_num) - np.arctan2(-p_exact / (mb * w), q_exact)
    phase_err = float(np.max(np.abs(np.angle(np.exp(1j * angle)))))
    obs = measure(tr, sys_)
    ring = obs.H_S + obs.collective  # everything except the decoupled modes
    drift = float(np.max(np.abs(ring - ring[0])) / abs(ring[0]))
    ok = phase_err <= 1e-5 and drift <= 1e-6
    return ok, {"max_phase_error": phase_err, "system_energy_drift": drift}, \
        "" if ok else f"phase error {phase_err:.3e}, system drift {drift:.3e}"


CHECKS = [
    (1, "secondary constraint discovery", 5.0, check_secondary, True),
    (2, "constraint matrix entry", 1.0, check_matrix, True),
    (3, "commutator table", 30.0, check_table, True),
    (4, "noncommutativity witness", 5.0, check_witness, True),
    (5, "Jacobi identity", 60.0, check_jacobi, True),
    (6, "dual-route equations of motion", 30.0, check_dual_route, True),
    (7, "rigid-ring limit", 1.0, check_rigid_limit, True),
    (8, "dynamics conservation", 30.0, check_conservation, False),
    (9, "scheme cross-validation", 60.0, check_schemes, False),
    (10, "penalty convergence", 120.0, check_penalty, False),
    (11, "bath sanity", 60.0, check_bath, False),
    (12, "negative control", 30.0, check_negative_control, True),
]


def run_check(number: int, base: ModelSpec | None = None) -> CheckResult:
    base = base or ModelSpec()
    for num, name, limit, fn, symbolic in CHECKS:
        if num == number:
            break
    else:
        raise KeyError(number)
    t0 = time.perf_counter()
    try:
        ok, measured, detail = fn(base) if symbolic else fn()
    except Exception as exc:  # a crash is a failed check, reported with its message
        log.debug("check %d raised", number, exc_info=True)
        ok, measured, detail = False, {}, f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t0
    if ok and elapsed > limit:
        ok, detail = False, f"time limit exceeded ({elapsed:.2f}s > {limit:g}s)"
    measured = dict(measured)
    return CheckResult(number, name, ok, elapsed, limit, measured, detail)


def run_all(base: ModelSpec | None = None, numbers=None) -> list[CheckResult]:
    numbers = numbers or [c[0] for c in CHECKS]
    return [run_check(n, base) for n in numbers]
