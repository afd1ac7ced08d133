"""Dirac quantization: commutator tables from Dirac brackets.

Every commutator is reported as the coefficient of ``i*hbar``; ``hbar``
itself never enters the coefficient, so rescaling it rescales each relation's
right-hand side and nothing else.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .constraints import ConstraintAnalysis, dirac, poisson
from .symalg import Expr, SymbolicError, VariableId, evaluate, leading_ratio, substitute, to_string


@dataclass
class CommutatorEntry:
    left: str
    right: str
    value: Expr
    ordering_ambiguous: bool

    def relation(self) -> str:
        return f"[{self.left}, {self.right}] = i*hbar*({to_string(self.value)})"


def commutator(f: Expr, g: Expr, analysis: ConstraintAnalysis) -> Expr:
    """Coefficient ``c`` in ``[f^, g^] = i hbar c``, i.e. the weakly reduced Dirac bracket."""
    return dirac(f, g, analysis)


def ordering_ambiguous(e: Expr) -> bool:
    """True when the coefficient multiplies two or more distinct phase-space operators.

    The classical coefficient does not say in which order those operators
    should act once promoted, so such entries are flagged rather than ordered.
    """
    return sum(1 for v in e.free_variables() if v.is_phase) >= 2


def commutator_table(analysis: ConstraintAnalysis, include_bath: bool = False) -> list[CommutatorEntry]:
    reg = analysis.registry
    variables: list[VariableId] = list(reg.x) + list(reg.p)
    if reg.environment:
        variables += [reg.Q, reg.P]
    if include_bath:
        variables += list(reg.q) + list(reg.pq)
    exprs = [Expr.var(reg, v) for v in variables]
    table = []
    for a, ea in zip(variables, exprs):
        for b, eb in zip(variables, exprs):
            if a == b:
                value = Expr.const(reg, 0)
            else:
                value = commutator(ea, eb, analysis)
            table.append(CommutatorEntry(a.name, b.name, value, ordering_ambiguous(value)))
    return table


def table_entry(table: Sequence[CommutatorEntry], left: str, right: str) -> CommutatorEntry:
    for e in table:
        if e.left == left and e.right == right:
            return e
    raise KeyError((left, right))


def table_json(table: Sequence[CommutatorEntry], parameters: Mapping | None = None) -> list[dict]:
    """JSON rows; with ``parameters`` each row also carries the coefficient at those values.

    Parameter values are converted through their shortest decimal form, so
    ``0.1`` becomes ``1/10`` and the substituted coefficient stays exact.
    """
    rows = []
    for e in table:
        row = {"left": e.left, "right": e.right, "coefficient": to_string(e.value),
               "ordering_ambiguous": e.ordering_ambiguous}
        if parameters is not None:
            present = {v: Fraction(repr(float(val))) for v, val in parameters.items() if e.value.depends_on(v)}
            row["at_parameters"] = to_string(substitute(e.value, present)) if present else row["coefficient"]
        rows.append(row)
    return rows


def table_text(table: Sequence[CommutatorEntry]) -> str:
    """Aligned plain-text rendering; ``*`` marks ordering-ambiguous entries."""
    rows = [(f"[{e.left}, {e.right}]", to_string(e.value), "*" if e.ordering_ambiguous else "")
            for e in table]
    w = max((len(r[0]) for r in rows), default=0)
    lines = ["commutator = i*hbar * coefficient   (* = ordering ambiguous)"]
    lines += [f"{lhs:<{w}} = i*hbar * {rhs} {flag}".rstrip() for lhs, rhs, flag in rows]
    return "\n".join(lines) + "\n"


def heavy_collective_limit(e: Expr, analysis: ConstraintAnalysis) -> Expr:
    """Leading behaviour as the collective mass ``M`` grows without bound."""
    return leading_ratio(e, analysis.registry.param("M"))


@dataclass
class NoncommutativityWitness:
    value: Expr
    nonzero: bool


def noncommutativity_witness(analysis: ConstraintAnalysis) -> NoncommutativityWitness:
    """``{H_S, H_E}_D`` weakly reduced, with a certificate that it does not vanish."""
    try:
        hs, he = analysis.parts["H_S"], analysis.parts["H_E"]
    except KeyError:
        raise ValueError("analysis does not carry the H_S / H_E split") from None
    value = dirac(hs, he, analysis)
    return NoncommutativityWitness(value, not analysis.reducer.is_weakly_zero(value))


def jacobi_expression(f: Expr, g: Expr, h: Expr, analysis: ConstraintAnalysis) -> tuple[Expr, Expr, Expr]:
    """The three cyclic terms of the Jacobi sum."""
    return (dirac(f, dirac(g, h, analysis), analysis),
            dirac(g, dirac(h, f, analysis), analysis),
            dirac(h, dirac(f, g, analysis), analysis))


def jacobi_residual(f: Expr, g: Expr, h: Expr, analysis: ConstraintAnalysis, points: Sequence[dict],
                    surface_tol: float = 1e-12, bind=None) -> list[float]:
    """Relative Jacobi residual at each surface point.

    The residual is ``|t1 + t2 + t3| / max(|t1| + |t2| + |t3|, tiny)``; it is
    exactly zero when every term vanishes.  A pole at a point yields ``nan``
    for that point only.  ``bind`` optionally maps each term to a numeric-ready
    expression (e.g. substituting a concrete potential).
    """
    terms = jacobi_expression(f, g, h, analysis)
    if bind is not None:
        terms = tuple(bind(t) for t in terms)
    cons = [c.expr for c in analysis.constraints]
    out = []
    for pt in points:
        for c in cons:
            if abs(evaluate(c, pt)) > surface_tol * max(1.0, _scale(c, pt)):
                raise ValueError(f"point is off the constraint surface: |{to_string(c)}| too large")
        try:
            vals = [evaluate(t, pt) for t in terms]
        except SymbolicError:
            out.append(math.nan)
            continue
        scale = sum(abs(v) for v in vals)
        out.append(0.0 if scale == 0.0 else abs(sum(vals)) / max(scale, 1e-300))
    return out


def _scale(e: Expr, pt) -> float:
    # magnitude of the largest monomial, for a relative surface test
    reg = e.registry
    num = e._parts()[0]
    syms = reg.symbols
    best = 0.0
    for mono, c in num.items():
        t = abs(float(c))
        for k, ex in enumerate(mono):
            if ex:
                v = pt.get(syms[k], pt.get(syms[k].name))
                t *= abs(float(v)) ** ex
        best = max(best, t)
    return best
