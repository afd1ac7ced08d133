"""Poisson and Dirac brackets, weak equality and the Dirac-Bergmann algorithm."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from sympy.polys.domains import QQ
from sympy.polys.fields import FracField
from sympy.polys.groebnertools import groebner
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyRing

from .symalg import DERIVATIVE, Expr, PhaseSpaceRegistry, SymbolicError, VariableId, to_string
from .symalg.expr import poly_partials

log = logging.getLogger(__name__)

FIRST_CLASS = "first-class"
SECOND_CLASS = "second-class"
UNCLASSIFIED = "unclassified"


class ConstraintError(Exception):
    """Base class for analysis failures."""


class GenerationBudgetExceeded(ConstraintError):
    pass


class DegenerateMultiplierError(ConstraintError):
    def __init__(self, message, expr=None):
        self.expr = expr
        super().__init__(message if expr is None else f"{message}: {expr}")


class SingularMultiplierError(ConstraintError):
    pass


class SingularMatrixError(ConstraintError):
    """``kind`` is "structural" (a row is zero) or "weak" (determinant vanishes on the surface)."""

    def __init__(self, message, kind):
        self.kind = kind
        super().__init__(f"{kind}ly singular constraint matrix: {message}")


class UnsupportedConstraintError(ConstraintError):
    pass


class RewriteBudgetExceeded(ConstraintError):
    pass


@dataclass
class Constraint:
    expr: Expr
    generation: int = 0
    cls: str = UNCLASSIFIED

    def __str__(self):
        return to_string(self.expr)


# -- Poisson bracket ----------------------------------------------------------

def _dependencies(e: Expr) -> set[VariableId]:
    deps = set()
    reg = e.registry
    for v in e.free_variables():
        if v.kind == DERIVATIVE:
            fn, _ = reg.derivative_info(v)
            deps.update(fn.args)
        else:
            deps.add(v)
    return deps


def poisson(f: Expr, g: Expr, registry: PhaseSpaceRegistry | None = None) -> Expr:
    """Canonical Poisson bracket summed over every canonical pair of the registry."""
    reg = registry or f.registry
    fd, gd = _dependencies(f), _dependencies(g)
    a, b = f._parts()
    c, d = g._parts()
    terms = []
    for qv, pv in reg.pairs:
        if not ((qv in fd and pv in gd) or (pv in fd and qv in gd)):
            continue
        aq, bq = poly_partials(reg, [a, b], qv)
        ap, bp = poly_partials(reg, [a, b], pv)
        cq, dq = poly_partials(reg, [c, d], qv)
        cp, dp = poly_partials(reg, [c, d], pv)
        terms.append((aq, bq, ap, bp, cq, dq, cp, dp))
    if not terms:
        return Expr.const(reg, 0)
    lift = reg.lift
    a, b, c, d = lift(a), lift(b), lift(c), lift(d)
    fconst, gconst = b.is_ground, d.is_ground
    total = reg.ring.zero
    for t in terms:
        aq, bq, ap, bp, cq, dq, cp, dp = (lift(x) for x in t)
        fq = aq if fconst else aq * b - a * bq
        fp = ap if fconst else ap * b - a * bp
        gq = cq if gconst else cq * d - c * dq
        gp = cp if gconst else cp * d - c * dp
        total += fq * gp - fp * gq
    den = reg.ring.one
    if not fconst:
        den = den * b * b
    if not gconst:
        den = den * d * d
    return Expr(reg, total, den)


# -- weak equality ------------------------------------------------------------

class WeakReducer:
    """Rewrites expressions modulo the ideal generated by constraint numerators.

    The rules are the solved forms of a reduced Groebner basis (graded lex,
    phase-space variables only; parameters and derivative symbols live in the
    coefficient field).  For the breathing-ring pair this contains
    ``Q^2 -> x.x`` and ``Q*P -> (M/m) x.p`` plus the two rules needed to make
    the system confluent.
    """

    def __init__(self, registry: PhaseSpaceRegistry, constraints: Iterable[Expr], budget: int = 25):
        self.registry = registry
        self.constraints = [c for c in constraints]
        self.budget = budget
        for c in self.constraints:
            self._check_shape(c)
        self._ring = None
        self._build()

    def _check_shape(self, c: Expr):
        free = c.free_variables()
        if c.is_zero():
            raise ConstraintError("constraint is identically zero")
        if any(v.kind == DERIVATIVE for v in free):
            raise UnsupportedConstraintError(
                f"constraint {c} involves opaque function symbols and has no solved form")
        if not any(v.is_phase for v in free):
            raise UnsupportedConstraintError(f"constraint {c} does not involve phase-space variables")

    def _build(self):
        reg = self.registry
        self._ring = reg.ring
        n = reg.n_phase
        names = [str(s) for s in reg.ring.symbols]
        self.n = n
        self.kfield = FracField(names[n:], QQ, grlex) if len(names) > n else None
        domain = self.kfield.to_domain() if self.kfield is not None else QQ
        self.rk = PolyRing(names[:n], domain, grlex)
        polys = [self._to_rk(c._parts()[0]) for c in self.constraints]
        self.basis = groebner(polys, self.rk) if polys else []
        if any(g.is_ground and g for g in self.basis):
            raise UnsupportedConstraintError("constraints are inconsistent (the ideal is trivial)")

    def _sync(self):
        if self._ring is not self.registry.ring:
            self._build()

    def rules(self) -> list[tuple[str, str]]:
        """Human-readable ``lhs -> rhs`` pairs of the rewrite system."""
        self._sync()
        out = []
        for g in self.basis:
            lm = g.LM
            lhs = self.rk({lm: self.rk.domain.one})
            rest = -(g - g.LT[1] * lhs)
            out.append((to_string(self._from_rk(lhs)), to_string(self._from_rk(rest))))
        return out

    def _to_rk(self, poly):
        reg = self.registry
        poly = reg.lift(poly)
        n = self.n
        if self.kfield is None:
            return self.rk.from_dict(dict(poly.items()))
        kring = self.kfield.ring
        groups: dict = {}
        for mono, c in poly.items():
            groups.setdefault(mono[:n], {})[mono[n:]] = c
        K = self.rk.domain
        return self.rk.from_dict({
            head: K.convert(self.kfield.new(kring.from_dict(tails), kring.one))
            for head, tails in groups.items()})

    def _from_rk(self, p):
        """RK polynomial -> Expr (clearing coefficient denominators)."""
        reg = self.registry
        ring = reg.ring
        if self.kfield is None:
            return Expr(reg, ring.from_dict(dict(p.items())))
        kring = self.kfield.ring
        dens = [c.denom for c in p.coeffs()] if p else []
        L = kring.one
        for dd in dens:
            if dd != L:
                L = L.lcm(dd)
        num = {}
        for mono, c in p.items():
            scaled = c.numer * L.exquo(c.denom) if c.denom != L else c.numer
            for tmono, tc in scaled.items():
                key = mono + tmono
                num[key] = num.get(key, 0) + tc
        lden = ring.from_dict({(0,) * self.n + m: c for m, c in L.items()})
        return Expr(reg, ring.from_dict(num), lden)

    def normal_form(self, poly):
        self._sync()
        p = self._to_rk(poly)
        return p.rem(self.basis) if self.basis else p

    def is_weakly_zero(self, e: Expr) -> bool:
        if e.is_zero():
            return True
        if not self.basis:
            return False
        return not self.normal_form(e._parts()[0])

    def reduce(self, e: Expr) -> Expr:
        """Rewrite numerator and denominator to normal form, renormalize, repeat to a fixpoint."""
        if not self.basis or e.is_zero():
            return e
        for _ in range(self.budget):
            self._sync()
            a, b = e._parts()
            pa, pb = self._to_rk(a), self._to_rk(b)
            ra, rb = pa.rem(self.basis), pb.rem(self.basis)
            if ra == pa and rb == pb:
                return e
            if not rb:
                raise SymbolicError(f"denominator of {e} vanishes on the constraint surface")
            e = self._from_rk(ra) / self._from_rk(rb)
        raise RewriteBudgetExceeded(f"weak reduction did not reach a fixpoint for {e}")


def weak_reduce(e: Expr, constraints: Sequence) -> Expr:
    exprs = [c.expr if isinstance(c, Constraint) else c for c in constraints]
    return WeakReducer(e.registry, exprs).reduce(e)


# -- linear algebra over the rational-function field ------------------------

def _eliminate(rows, ncols, reducer: WeakReducer):
    """Fraction-free elimination of ``sum_k A[j][k] lam_k + b[j] = 0``.

    Returns (solution for determined unknowns, residual (b, row index) for rows
    without a pivot, list of undetermined columns).
    """
    rows = [([reducer.reduce(a) for a in coeffs], reducer.reduce(rhs), tag) for coeffs, rhs, tag in rows]
    used = set()
    pivots = {}
    for col in range(ncols):
        cands = [r for r in range(len(rows)) if r not in used and not reducer.is_weakly_zero(rows[r][0][col])]
        if not cands:
            continue
        p = min(cands, key=lambda r: (rows[r][0][col].total_degree(), r))
        used.add(p)
        pivots[col] = p
        pc, prhs, _ = rows[p]
        piv = pc[col]
        for r in range(len(rows)):
            if r == p:
                continue
            rc, rrhs, tag = rows[r]
            a = rc[col]
            if reducer.is_weakly_zero(a):
                continue
            rc = [reducer.reduce(piv * x - a * y) for x, y in zip(rc, pc)]
            rows[r] = (rc, reducer.reduce(piv * rrhs - a * prhs), tag)
    residuals = [(rows[r][1], rows[r][2]) for r in range(len(rows)) if r not in used]
    free = [c for c in range(ncols) if c not in pivots]
    solution = {}
    for col, p in pivots.items():
        coeffs, rhs, _ = rows[p]
        if any(not reducer.is_weakly_zero(coeffs[k]) for k in free):
            continue
        solution[col] = reducer.reduce(-rhs / coeffs[col])
    return solution, residuals, free


def invert_matrix(matrix: list[list[Expr]], reducer: WeakReducer) -> list[list[Expr]]:
    n = len(matrix)
    if n == 0:
        return []
    reg = matrix[0][0].registry
    for i, row in enumerate(matrix):
        if all(reducer.is_weakly_zero(a) for a in row):
            raise SingularMatrixError(f"row {i} is zero", "structural")
    one, zero = Expr.const(reg, 1), Expr.const(reg, 0)
    aug = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        cands = [r for r in range(col, n) if not reducer.is_weakly_zero(aug[r][col])]
        if not cands:
            raise SingularMatrixError(f"no pivot in column {col}", "weak")
        p = min(cands, key=lambda r: (aug[r][col].total_degree(), r))
        aug[col], aug[p] = aug[p], aug[col]
        piv = aug[col][col]
        aug[col] = [reducer.reduce(x / piv) for x in aug[col]]
        for r in range(n):
            if r != col and not reducer.is_weakly_zero(aug[r][col]):
                f = aug[r][col]
                aug[r] = [reducer.reduce(x - f * y) for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


# -- analysis -------------------------------------------------------------------

@dataclass
class ConstraintAnalysis:
    registry: PhaseSpaceRegistry
    hamiltonian: Expr
    constraints: list[Constraint]
    constraint_matrix: list[list[Expr]]
    inverse_matrix: list[list[Expr]] | None
    multipliers: dict[int, Expr]
    reducer: WeakReducer
    parts: dict[str, Expr] = field(default_factory=dict)
    _bracket_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_constraints(cls, hamiltonian: Expr, constraints: Sequence, parts=None):
        """Assemble matrix, inverse and multipliers for a closed constraint set."""
        reg = hamiltonian.registry
        cons = [c if isinstance(c, Constraint) else Constraint(c, 0) for c in constraints]
        reducer = WeakReducer(reg, [c.expr for c in cons])
        matrix = [[reducer.reduce(poisson(a.expr, b.expr)) for b in cons] for a in cons]
        for c, row in zip(cons, matrix):
            c.cls = FIRST_CLASS if all(reducer.is_weakly_zero(x) for x in row) else SECOND_CLASS
        inverse = None
        if cons and all(c.cls == SECOND_CLASS for c in cons):
            inverse = invert_matrix(matrix, reducer)
        out = cls(reg, hamiltonian, cons, matrix, inverse, {}, reducer, dict(parts or {}))
        if inverse is not None:
            out.multipliers = solve_multipliers(out)
        return out

    @property
    def second_class(self) -> bool:
        return all(c.cls == SECOND_CLASS for c in self.constraints)

    def reduce(self, e: Expr) -> Expr:
        return self.reducer.reduce(e)

    def bracket_with_constraints(self, f: Expr) -> list[Expr]:
        key = to_string(f)
        hit = self._bracket_cache.get(key)
        if hit is None:
            hit = [self.reduce(poisson(f, c.expr)) for c in self.constraints]
            self._bracket_cache[key] = hit
        return hit


def run_dirac_bergmann(H: Expr, primary: Sequence, registry: PhaseSpaceRegistry | None = None,
                       max_generations: int = 10, parts=None) -> ConstraintAnalysis:
    """Generate secondary constraints from consistency of the primary ones.

    Each round imposes ``{phi_j, H + sum_k lam_k phi_k} ~ 0`` for every
    current constraint (``k`` over primary constraints).  Rows that fix
    multipliers are consumed; lambda-free residuals that are not weakly zero
    become constraints of the next generation.
    """
    reg = registry or H.registry
    prim = [c.expr if isinstance(c, Constraint) else c for c in primary]
    if not prim:
        raise ConstraintError("no primary constraints")
    cons: list[Constraint] = []
    for e in prim:
        if cons and WeakReducer(reg, [c.expr for c in cons]).is_weakly_zero(e):
            raise ConstraintError(f"primary constraint {e} is implied by the earlier ones")
        cons.append(Constraint(e, 0))
        WeakReducer(reg, [c.expr for c in cons])  # shape check

    for generation in range(1, max_generations + 1):
        reducer = WeakReducer(reg, [c.expr for c in cons])
        rows = [([poisson(c.expr, pk) for pk in prim], poisson(c.expr, H), i) for i, c in enumerate(cons)]
        solution, residuals, free = _eliminate(rows, len(prim), reducer)
        new = []
        for r, tag in residuals:
            if reducer.is_weakly_zero(r):
                continue
            current = [c.expr for c in cons] + [c.expr for c in new]
            if WeakReducer(reg, current).is_weakly_zero(r):
                continue
            log.debug("generation %d: new constraint %s from row %d", generation, r, tag)
            new.append(Constraint(WeakReducer(reg, current).reduce(r), generation))
        if not new:
            break
        cons.extend(new)
    else:
        raise GenerationBudgetExceeded(
            f"no closure after {max_generations} generations ({len(cons)} constraints)")

    analysis = ConstraintAnalysis.from_constraints(H, cons, parts=parts)
    if free and analysis.second_class:
        raise DegenerateMultiplierError(
            "multiplier left undetermined although every constraint is second-class",
            cons[free[0]].expr)
    return analysis


def solve_multipliers(analysis: ConstraintAnalysis) -> dict[int, Expr]:
    """Solve ``sum_k lam_k {phi_j, phi_k} ~ -{phi_j, H}`` over all constraints."""
    if not analysis.constraints:
        return {}
    if not analysis.second_class:
        raise SingularMultiplierError("multiplier system is singular (first-class constraints present)")
    H = analysis.hamiltonian
    rows = [(list(analysis.constraint_matrix[j]), poisson(c.expr, H), j)
            for j, c in enumerate(analysis.constraints)]
    solution, residuals, free = _eliminate(rows, len(analysis.constraints), analysis.reducer)
    if free or len(solution) != len(analysis.constraints):
        raise SingularMultiplierError("multiplier system is singular")
    return dict(sorted(solution.items()))


def dirac(f: Expr, g: Expr, analysis: ConstraintAnalysis) -> Expr:
    """Dirac bracket, weakly reduced."""
    P = poisson(f, g)
    if not analysis.constraints:
        return P
    if analysis.inverse_matrix is None:
        raise SingularMatrixError("analysis has first-class constraints", "structural")
    F = analysis.bracket_with_constraints(f)
    G = [-x for x in analysis.bracket_with_constraints(g)]
    corr = Expr.const(analysis.registry, 0)
    inv = analysis.inverse_matrix
    for a, Fa in enumerate(F):
        if Fa.is_zero():
            continue
        for b, Gb in enumerate(G):
            if Gb.is_zero() or inv[a][b].is_zero():
                continue
            corr = corr + Fa * inv[a][b] * Gb
    return analysis.reduce(P - corr)


def equations_of_motion(analysis: ConstraintAnalysis, variables: Sequence[VariableId] | None = None):
    reg = analysis.registry
    variables = list(variables) if variables is not None else list(reg.phase_variables)
    return {v: dirac(Expr.var(reg, v), analysis.hamiltonian, analysis) for v in variables}


def total_hamiltonian(analysis: ConstraintAnalysis) -> Expr:
    """``H + sum_k lam_k phi_k`` with the solved multipliers."""
    H = analysis.hamiltonian
    for k, lam in analysis.multipliers.items():
        H = H + lam * analysis.constraints[k].expr
    return H


def multiplier_route(analysis: ConstraintAnalysis, f: Expr) -> Expr:
    """``{f, H + lam.phi}_P`` weakly reduced; the independent route to the EOM."""
    if analysis.constraints and not analysis.multipliers:
        raise SingularMultiplierError("no multipliers were solved for this analysis")
    return analysis.reduce(poisson(f, total_hamiltonian(analysis)))


def analysis_report(analysis: ConstraintAnalysis, eom: bool = True) -> dict:
    """JSON-ready report; every expression string round-trips through the parser."""
    report = {
        "constraints": [{"expression": to_string(c.expr), "generation": c.generation, "class": c.cls}
                        for c in analysis.constraints],
        "constraint_matrix": [[to_string(x) for x in row] for row in analysis.constraint_matrix],
        "multipliers": [to_string(analysis.multipliers[k]) if k in analysis.multipliers else None
                        for k in range(len(analysis.constraints))],
        "eom": {},
    }
    if eom and (not analysis.constraints or analysis.inverse_matrix is not None):
        report["eom"] = {v.name: to_string(e) for v, e in equations_of_motion(analysis).items()}
    return report
