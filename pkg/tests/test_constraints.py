import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from dirac_workbench.constraints import (SECOND_CLASS, FIRST_CLASS, Constraint, ConstraintAnalysis,
                                         ConstraintError, GenerationBudgetExceeded, SingularMatrixError,
                                         SingularMultiplierError, UnsupportedConstraintError, WeakReducer,
                                         analysis_report, dirac, equations_of_motion, invert_matrix,
                                         multiplier_route, poisson, run_dirac_bergmann, solve_multipliers,
                                         total_hamiltonian, weak_reduce)
from dirac_workbench.dynamics import ModelSpec, analyze_model, build_symbolic
from dirac_workbench.symalg import Expr, ParseError, PhaseSpaceRegistry, SymbolicError, evaluate, parse, to_string

PHI = "dot(x,x) - Q^2"
CHI = "2*dot(x,p)/m - 2*Q*P/M"


def _random_expr(reg, leaves):
    base = st.one_of(st.sampled_from(leaves), st.integers(-3, 3).map(str))
    tree = st.recursive(base, lambda s: st.one_of(
        st.tuples(s, st.sampled_from(["+", "-", "*"]), s).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(s, s).map(lambda t: f"({t[0]})/({t[1]})")), max_leaves=4)

    def build(text):
        try:
            return parse(text, reg)
        except (SymbolicError, ParseError):
            assume(False)
    return tree.map(build)


# -- Poisson bracket -------------------------------------------------------------

def test_poisson_examples(ring):
    sm, an = ring
    reg = sm.registry
    assert poisson(parse("x1", reg), parse("p1", reg)) == Expr.const(reg, 1)
    assert poisson(parse(PHI, reg), parse(CHI, reg)) == parse("4*(dot(x,x)/m + Q^2/M)", reg)
    assert poisson(parse("Q", reg), sm.H_E) == parse("P/M", reg)


REG = PhaseSpaceRegistry(2, 0, True, ["m", "M"])
R_EXPR = _random_expr(REG, ["x1", "x2", "p1", "p2", "Q", "P", "m"])


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(R_EXPR, R_EXPR, R_EXPR)
def test_poisson_antisymmetry_bilinearity_leibniz(f, g, h):
    assert poisson(f, g) == -poisson(g, f)
    assert poisson(f + 2 * g, h) == poisson(f, h) + 2 * poisson(g, h)
    assert poisson(f * g, h) == f * poisson(g, h) + poisson(f, h) * g


# -- weak reduction --------------------------------------------------------------

@pytest.fixture(scope="module")
def reducer():
    return WeakReducer(REG, [parse(PHI, REG), parse(CHI, REG)])


def test_weak_reduce_examples(reducer):
    assert reducer.reduce(parse("M*dot(x,x) + m*Q^2", REG)) == parse("(M + m)*dot(x,x)", REG)
    assert reducer.reduce(parse(CHI, REG)).is_zero()
    assert reducer.reduce(parse(PHI, REG)).is_zero()
    L = parse("x1*p2 - x2*p1", REG)
    assert reducer.reduce(L) == L


def test_weak_reduce_contains_the_solved_pair(reducer):
    rules = dict(reducer.rules())
    assert parse(rules["Q^2"], REG) == parse("dot(x,x)", REG)
    assert parse(rules["Q*P"], REG) == parse("(M/m)*dot(x,p)", REG)


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(R_EXPR)
def test_weak_reduce_idempotent_and_weakly_equal(reducer, e):
    r = reducer.reduce(e)
    assert reducer.reduce(r) == r
    # reduction never leaves the class of e modulo the constraints (numerator of the difference)
    assert reducer.is_weakly_zero(r - e)


def test_weak_reduce_helper_accepts_constraints():
    e = parse("Q^2 + x1", REG)
    assert weak_reduce(e, [Constraint(parse(PHI, REG), 0)]) == parse("dot(x,x) + x1", REG)


def test_weak_reducer_rejects_bad_shapes():
    with pytest.raises(UnsupportedConstraintError):
        WeakReducer(REG, [parse("m - 1", REG)])
    with pytest.raises(UnsupportedConstraintError):
        WeakReducer(REG, [parse("V(x)", REG)])
    with pytest.raises(UnsupportedConstraintError, match="inconsistent"):
        WeakReducer(REG, [parse("x1", REG), parse("x1 - 1", REG)])


# -- Dirac-Bergmann ----------------------------------------------------------------

def test_ring_model_generates_chi(ring):
    sm, an = ring
    reg = sm.registry
    assert [c.generation for c in an.constraints] == [0, 1]
    assert all(c.cls == SECOND_CLASS for c in an.constraints)
    assert an.constraints[1].expr == parse(CHI, reg)


def test_bath_does_not_change_constraints(ring_bath):
    sm, an = ring_bath
    assert len(an.constraints) == 2
    assert an.constraints[1].expr == parse(CHI, sm.registry)


def test_hyperplane_model():
    sm = build_symbolic(ModelSpec(environment=False, constraints=["x1"]))
    reg = sm.registry
    an = run_dirac_bergmann(sm.H, sm.primary)
    assert [to_string(c.expr) for c in an.constraints] == ["x1", "p1/m"]
    assert an.second_class
    # multiplier keeps p1 = 0 under the total Hamiltonian flow
    HT = total_hamiltonian(an)
    assert an.reducer.is_weakly_zero(poisson(parse("p1", reg), HT))


def test_complete_pair_given_up_front(ring):
    sm, an = ring
    again = run_dirac_bergmann(sm.H, [c.expr for c in an.constraints])
    assert [c.generation for c in again.constraints] == [0, 0]


def test_empty_primary_list(ring):
    sm, _ = ring
    with pytest.raises(ConstraintError, match="no primary constraints"):
        run_dirac_bergmann(sm.H, [])


def test_generation_budget(ring):
    sm, _ = ring
    with pytest.raises(GenerationBudgetExceeded):
        run_dirac_bergmann(sm.H, sm.primary, max_generations=1)


def test_first_class_constraint_is_reported():
    reg = PhaseSpaceRegistry(2, 0, False, ["m"])
    H = parse("p2^2/(2*m)", reg)
    an = run_dirac_bergmann(H, [parse("p1", reg)])
    assert [c.cls for c in an.constraints] == [FIRST_CLASS]
    with pytest.raises(SingularMultiplierError):
        solve_multipliers(an)
    with pytest.raises(SingularMatrixError) as info:
        dirac(parse("x1", reg), parse("p1", reg), an)
    assert info.value.kind == "structural"


def test_matrix_inverse_and_antisymmetry(ring):
    sm, an = ring
    C, Ci = an.constraint_matrix, an.inverse_matrix
    n = len(C)
    for a in range(n):
        for b in range(n):
            assert an.reducer.is_weakly_zero(C[a][b] + C[b][a])
            prod = sum((C[a][k] * Ci[k][b] for k in range(n)), Expr.const(sm.registry, 0))
            assert an.reducer.is_weakly_zero(prod - (1 if a == b else 0))


def test_weakly_singular_matrix():
    reg = REG
    red = WeakReducer(reg, [parse(PHI, reg)])
    m = [[parse("x1", reg), parse("Q", reg)], [parse("x1*Q", reg), parse("dot(x,x)", reg)]]
    with pytest.raises(SingularMatrixError) as info:
        invert_matrix(m, red)
    assert info.value.kind == "weak"


# -- multipliers against an independent sympy derivation ---------------------------

def _sympy_multiplier():
    x1, x2, p1, p2, Q, P, m, M = sp.symbols("x1 x2 p1 p2 Q P m M")
    pairs = [(x1, p1), (x2, p2), (Q, P)]

    def pb(f, g):
        return sum(sp.diff(f, a) * sp.diff(g, b) - sp.diff(f, b) * sp.diff(g, a) for a, b in pairs)
    H = (p1 ** 2 + p2 ** 2) / (2 * m) + P ** 2 / (2 * M)
    phi = x1 ** 2 + x2 ** 2 - Q ** 2
    chi = 2 * (x1 * p1 + x2 * p2) / m - 2 * Q * P / M
    lam_phi = -pb(chi, H) / pb(chi, phi)
    return sp.lambdify((x1, x2, p1, p2, Q, P, m, M), lam_phi)


def test_multiplier_matches_independent_derivation():
    spec = ModelSpec(Omega=0.0)
    sm, an = analyze_model(spec)
    lam = sm.bind_potential(an.multipliers[0])  # free potential: V = 0
    oracle = _sympy_multiplier()
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.standard_normal(2)
        p = rng.standard_normal(2)
        m, M = rng.uniform(0.5, 2.0, 2)
        Q = np.sqrt(x @ x)
        P = M * (x @ p) / (m * Q)
        pt = {"x1": x[0], "x2": x[1], "p1": p[0], "p2": p[1], "Q": Q, "P": P, "m": m, "M": M, "Omega": 0.0}
        got = evaluate(lam, pt)
        want = oracle(x[0], x[1], p[0], p[1], Q, P, m, M)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-12)
    assert an.multipliers[1].is_zero()


# -- Dirac bracket -----------------------------------------------------------------

def test_dirac_examples(ring):
    sm, an = ring
    reg = sm.registry
    assert dirac(parse("x1", reg), parse("p2", reg), an) == parse("-(M/(m+M))*x1*x2/dot(x,x)", reg)
    assert dirac(parse("Q", reg), parse("P", reg), an) == parse("M/(m+M)", reg)
    assert dirac(an.constraints[0].expr, sm.H, an).is_zero()


def test_constraints_are_central(ring_bath):
    sm, an = ring_bath
    reg = sm.registry
    for c in an.constraints:
        for v in reg.phase_variables:
            assert an.reducer.is_weakly_zero(dirac(c.expr, Expr.var(reg, v), an))


def test_two_constraint_closed_form(ring):
    sm, an = ring
    reg = sm.registry
    phi, chi = parse(PHI, reg), parse(CHI, reg)
    pre = parse("m*M/(4*(M*dot(x,x) + m*Q^2))", reg)
    for f, g in [("x1", "p1"), ("p1", "p2"), ("P", "p2"), ("Q", "x1")]:
        F, G = parse(f, reg), parse(g, reg)
        closed = poisson(F, G) + pre * (poisson(F, phi) * poisson(chi, G) - poisson(F, chi) * poisson(phi, G))
        assert an.reducer.is_weakly_zero(dirac(F, G, an) - closed)


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.data())
def test_dirac_antisymmetry_bilinearity_leibniz(ring, data):
    sm, an = ring
    reg = sm.registry
    ex = _random_expr(reg, ["x1", "x2", "p1", "p2", "Q", "P"])
    f, g, h = data.draw(ex), data.draw(ex), data.draw(ex)
    red = an.reducer
    assert red.is_weakly_zero(dirac(f, g, an) + dirac(g, f, an))
    assert red.is_weakly_zero(dirac(f + 3 * g, h, an) - dirac(f, h, an) - 3 * dirac(g, h, an))
    assert red.is_weakly_zero(dirac(f * g, h, an) - f * dirac(g, h, an) - dirac(f, h, an) * g)


# -- equations of motion -------------------------------------------------------------

def test_dual_route(ring_bath):
    sm, an = ring_bath
    reg = sm.registry
    for v, e in equations_of_motion(an).items():
        assert an.reducer.is_weakly_zero(e - multiplier_route(an, Expr.var(reg, v)))


def test_angular_momentum_is_conserved(ring):
    sm, an = ring
    reg = sm.registry
    L = parse("x1*p2 - x2*p1", reg)
    # V is opaque here; conservation needs a central potential
    Ldot = sm.bind_potential(dirac(L, sm.H, an))
    assert an.reducer.is_weakly_zero(Ldot)


def test_zero_hamiltonian_gives_no_motion(ring):
    sm, an = ring
    zero = ConstraintAnalysis.from_constraints(Expr.const(sm.registry, 0), [c.expr for c in an.constraints])
    assert all(e.is_zero() for e in equations_of_motion(zero).values())


def test_report_shape_and_round_trip(ring):
    sm, an = ring
    report = analysis_report(an)
    assert list(report) == ["constraints", "constraint_matrix", "multipliers", "eom"]
    json.dumps(report)
    for c, rec in zip(an.constraints, report["constraints"]):
        assert parse(rec["expression"], sm.registry) == c.expr
    for name, text in report["eom"].items():
        v = sm.registry.lookup(name)
        assert parse(text, sm.registry) == equations_of_motion(an, [v])[v]
