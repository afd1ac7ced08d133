"""Exact rational functions over a :class:`PhaseSpaceRegistry`.

An :class:`Expr` is a pair of polynomials with rational coefficients kept in
normal form: numerator and denominator are coprime, the denominator is monic
under the registry's graded-lex order, and zero is ``0/1``.  Two expressions
are equal iff their normal forms coincide, so ``equals_zero`` is exact.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Mapping

from .registry import COORDINATE, DERIVATIVE, MOMENTUM, PARAMETER, PhaseSpaceRegistry, VariableId


class SymbolicError(ArithmeticError):
    """Zero denominators, unbound symbols and poles."""


class Expr:
    __slots__ = ("registry", "num", "den")

    def __init__(self, registry: PhaseSpaceRegistry, num, den=None):
        ring = registry.ring
        num = registry.lift(num)
        den = ring.one if den is None else registry.lift(den)
        self.registry = registry
        self.num, self.den = _normalize(ring, num, den)

    @classmethod
    def _raw(cls, registry, num, den):
        e = object.__new__(cls)
        e.registry, e.num, e.den = registry, num, den
        return e

    # -- constructors -----------------------------------------------------
    @classmethod
    def const(cls, registry, value) -> "Expr":
        ring = registry.ring
        if isinstance(value, float):
            value = Fraction(value)
        if isinstance(value, Rational):
            return cls(registry, ring(ring.domain.convert(value.numerator)),
                       ring(ring.domain.convert(value.denominator)))
        raise TypeError(f"cannot make a constant from {value!r}")

    @classmethod
    def var(cls, registry, v: VariableId) -> "Expr":
        return cls._raw(registry, registry.gen(v), registry.ring.one)

    # -- coercion ---------------------------------------------------------
    def _parts(self):
        reg = self.registry
        if self.num.ring is reg.ring:
            return self.num, self.den
        return reg.lift(self.num), reg.lift(self.den)

    def _coerce(self, other) -> "Expr":
        if isinstance(other, Expr):
            if other.registry is not self.registry:
                raise SymbolicError("expressions belong to different registries")
            return other
        if isinstance(other, (int, Fraction, float)):
            return Expr.const(self.registry, other)
        return NotImplemented

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self._parts()
        c, d = other._parts()
        if b == d:
            return Expr(self.registry, a + c, b)
        return Expr(self.registry, a * d + c * b, b * d)

    __radd__ = __add__

    def __neg__(self):
        a, b = self._parts()
        return Expr._raw(self.registry, -a, b)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self._parts()
        c, d = other._parts()
        return Expr(self.registry, a * c, b * d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self._parts()
        c, d = other._parts()
        if not c:
            raise SymbolicError("division by an expression that is identically zero")
        return Expr(self.registry, a * d, b * c)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        if n == 0:
            return Expr.const(self.registry, 1)  # 0^0 = 1, as in Python
        a, b = self._parts()
        if n < 0:
            if not a:
                raise SymbolicError("zero raised to a negative power")
            a, b, n = b, a, -n
            return Expr(self.registry, a ** n, b ** n)
        return Expr._raw(self.registry, a ** n, b ** n)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        a, b = self._parts()
        c, d = other._parts()
        return a == c and b == d

    __hash__ = None

    # -- inspection -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return self.num.is_ground and self.den.is_ground

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise SymbolicError(f"{self} is not constant")
        c = self.num.LC if self.num else 0
        return Fraction(int(c.numerator), int(c.denominator)) if self.num else Fraction(0)

    def free_variables(self) -> list[VariableId]:
        """Variables with a nonzero exponent somewhere, in ring order."""
        a, b = self._parts()
        used = [False] * a.ring.ngens
        for poly in (a, b):
            for mono in poly.itermonoms():
                for k, e in enumerate(mono):
                    if e:
                        used[k] = True
        syms = self.registry.symbols
        return [syms[k] for k, u in enumerate(used) if u]

    def depends_on(self, v: VariableId) -> bool:
        return v in self.free_variables()

    def total_degree(self) -> int:
        return _degree(self.num) + _degree(self.den)

    def __str__(self):
        from .parser import to_string
        return to_string(self)

    def __repr__(self):
        return f"Expr({self})"


def _degree(poly) -> int:
    return max((sum(m) for m in poly.itermonoms()), default=0)


def _normalize(ring, num, den):
    if not den:
        raise SymbolicError("denominator is identically zero")
    if not num:
        return ring.zero, ring.one
    if den.is_ground:
        c = den.LC
        return (num if c == 1 else num.quo_ground(c)), ring.one
    num, den = num.cancel(den)
    lc = den.LC
    if lc != 1:
        num = num.quo_ground(lc)
        den = den.quo_ground(lc)
    return num, den


# -- module-level operations ----------------------------------------------

def equals_zero(e: Expr) -> bool:
    return e.is_zero()


def _present_derivatives(reg: PhaseSpaceRegistry, polys) -> list[VariableId]:
    syms = reg.symbols
    found = set()
    for poly in polys:
        for mono in poly.itermonoms():
            for k, ex in enumerate(mono):
                if ex and syms[k].kind == DERIVATIVE:
                    found.add(k)
    return [syms[k] for k in sorted(found)]


def _chain_targets(reg, present, v):
    """Derivative symbol obtained by differentiating each present symbol by ``v``."""
    out = {}
    for s in present:
        fn, mi = reg.derivative_info(s)
        if v in fn.args:
            k = fn.args.index(v)
            bumped = tuple(c + (1 if i == k else 0) for i, c in enumerate(mi))
            out[s] = reg.derivative(fn.name, bumped)
    return out


def _poly_diff(reg, poly, v, targets):
    poly = reg.lift(poly)
    ring = reg.ring
    out = poly.diff(ring.gens[reg.index(v)])
    for s, t in targets.items():
        out += poly.diff(ring.gens[reg.index(s)]) * ring.gens[reg.index(t)]
    return out


def poly_partials(reg: PhaseSpaceRegistry, polys, v: VariableId):
    """Partial derivatives of several polynomials by ``v`` with the chain rule
    applied to derivative symbols of declared functions."""
    targets = {}
    if v.kind == COORDINATE:
        targets = _chain_targets(reg, _present_derivatives(reg, polys), v)
    return [_poly_diff(reg, p, v, targets) for p in polys]


def differentiate(e: Expr, v: VariableId) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``v``."""
    if v.kind not in (COORDINATE, MOMENTUM, PARAMETER):
        raise SymbolicError(f"cannot differentiate with respect to {v}")
    reg = e.registry
    a, b = e._parts()
    da, db = poly_partials(reg, [a, b], v)
    a, b = reg.lift(a), reg.lift(b)
    if b.is_ground:
        return Expr(reg, da, b)
    return Expr(reg, da * b - a * db, b * b)


def substitute(e: Expr, bindings: Mapping[VariableId, Expr]) -> Expr:
    """Simultaneous substitution of variables by expressions, then normalization."""
    reg = e.registry
    clean = {}
    for v, val in bindings.items():
        if not isinstance(val, Expr):
            val = Expr.const(reg, val)
        if val.registry is not reg:
            raise SymbolicError("binding belongs to a different registry")
        if val.depends_on(v):
            raise SymbolicError(f"binding for {v} refers to {v} itself")
        clean[v] = val
    a, b = e._parts()
    na, da = _subst_poly(reg, a, clean)
    nb, db = _subst_poly(reg, b, clean)
    if not nb:
        raise SymbolicError("denominator is identically zero after substitution")
    return Expr(reg, na * db, da * nb)


def _subst_poly(reg, poly, bindings):
    ring = reg.ring
    poly = reg.lift(poly)
    idx = {reg.index(v): val._parts() for v, val in bindings.items()}
    idx = {k: (reg.lift(n), reg.lift(d)) for k, (n, d) in idx.items()}
    degs = poly.degrees() if poly else ()
    active = {k: nd for k, nd in idx.items() if degs and degs[k] > 0}
    if not active:
        return poly, ring.one
    cache = {}

    def power(k, which, n):
        key = (k, which, n)
        if key not in cache:
            cache[key] = active[k][which] ** n
        return cache[key]

    out = ring.zero
    for mono, c in poly.items():
        kept = list(mono)
        term = ring.one
        for k in active:
            ex = mono[k]
            kept[k] = 0
            if ex:
                term = term * power(k, 0, ex)
            rest = degs[k] - ex
            if rest and not active[k][1].is_ground:
                term = term * power(k, 1, rest)
            elif rest:
                term = term * active[k][1].LC ** rest
        out += term * ring({tuple(kept): c})
    den = ring.one
    for k in active:
        dpoly = active[k][1]
        den = den * (dpoly ** degs[k] if not dpoly.is_ground else ring(dpoly.LC ** degs[k]))
    return out, den


def _lookup_value(reg, point, v):
    if v in point:
        return point[v]
    if v.name in point:
        return point[v.name]
    raise KeyError(v)


def evaluate_poly(reg, poly, values: dict[int, float]) -> float:
    total = 0.0
    for mono, c in poly.items():
        t = float(c)
        for k, ex in enumerate(mono):
            if ex:
                t *= values[k] ** ex
        total += t
    return total


def evaluate(e: Expr, point: Mapping) -> float:
    """IEEE double value of ``e`` at ``point`` (keys: VariableId or name)."""
    reg = e.registry
    syms = reg.symbols
    values = {}
    for v in e.free_variables():
        try:
            values[reg.index(v)] = float(_lookup_value(reg, point, v))
        except KeyError:
            raise SymbolicError(f"unbound symbol {v.name}") from None
    a, b = e._parts()
    den = evaluate_poly(reg, b, values)
    if den == 0.0 or not math.isfinite(den):
        raise SymbolicError(f"pole: denominator of {e} vanishes at the point")
    return evaluate_poly(reg, a, values) / den


def leading_ratio(e: Expr, v: VariableId) -> Expr:
    """Ratio of the leading coefficients in ``v`` of numerator and denominator.

    This is the formal ``v -> infinity`` limit when both have the same degree,
    zero when the numerator has lower degree, and an error otherwise.
    """
    reg = e.registry
    a, b = e._parts()
    g = reg.ring.gens[reg.index(v)]
    da, db = a.degree(g), b.degree(g)
    if not a:
        return Expr.const(reg, 0)
    if da > db:
        raise SymbolicError(f"{e} diverges as {v} grows")
    if da < db:
        return Expr.const(reg, 0)
    return Expr(reg, a.coeff_wrt(g, da), b.coeff_wrt(g, db))
