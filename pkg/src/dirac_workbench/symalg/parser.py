"""Recursive-descent parser and printer for phase-space expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' INTEGER)?
    base   := NUMBER | IDENT | IDENT '(' args ')' | '(' expr ')'

Unary minus binds looser than ``^`` so that ``-x1^2`` is ``-(x1^2)``.
Numbers are integers or decimals (read exactly).  Built-in calls are
``dot(u, v)`` for the vectors ``x, p, q, pq``, a declared function applied to
its arguments (``V(x)`` or ``V(x1, ..., xd)``) and ``D(V, x1, x2, ...)`` for
partial derivatives.  The printer emits the same grammar.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .expr import Expr, SymbolicError
from .registry import DERIVATIVE, PhaseSpaceRegistry, RegistryError

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))")


class ParseError(ValueError):
    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


@dataclass
class _Tok:
    kind: str
    value: str
    pos: int


def tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    VECTORS = ("x", "p", "q", "pq")

    def __init__(self, text, registry: PhaseSpaceRegistry):
        self.text = text
        self.reg = registry
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t.value != value or t.kind == "end":
            raise ParseError(f"expected {value!r}, found {t.value or 'end of input'!r}", t.pos, self.text)
        return t

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.pos, self.text)

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            raise self.error("empty expression")
        e = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected token {self.tok.value!r}")
        return e

    def expr(self):
        e = self.term()
        while self.tok.value in ("+", "-") and self.tok.kind == "op":
            op = self.take().value
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.factor()
        while self.tok.value in ("*", "/") and self.tok.kind == "op":
            op_tok = self.take()
            start = self.tok
            rhs = self.factor()
            if op_tok.value == "*":
                e = e * rhs
            else:
                if rhs.is_zero():
                    if self._is_zero_literal(start):
                        raise self.error("division by the literal zero", start)
                    raise self.error("zero denominator after normalization", start)
                e = e / rhs
        return e

    def _is_zero_literal(self, tok):
        return tok.kind == "num" and Fraction(tok.value) == 0

    def factor(self):
        if self.tok.kind == "op" and self.tok.value == "-":
            self.take()
            return -self.factor()
        base = self.base()
        if self.tok.kind == "op" and self.tok.value == "^":
            self.take()
            t = self.take()
            if t.kind != "num" or not t.value.isdigit():
                raise ParseError("exponent must be an unsigned integer", t.pos, self.text)
            return base ** int(t.value)
        return base

    def base(self):
        t = self.take()
        if t.kind == "num":
            return Expr.const(self.reg, Fraction(t.value))
        if t.kind == "op" and t.value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "id":
            if self.tok.kind == "op" and self.tok.value == "(":
                return self.call(t)
            return self.identifier(t)
        raise ParseError(f"unexpected {t.value or 'end of input'!r}", t.pos, self.text)

    def identifier(self, t):
        if t.value in self.reg.functions:
            raise ParseError(f"function {t.value!r} must be applied to its arguments", t.pos, self.text)
        try:
            v = self.reg.lookup(t.value)
        except RegistryError:
            raise ParseError(f"unknown identifier {t.value!r}", t.pos, self.text) from None
        if v.kind == DERIVATIVE:
            raise ParseError(f"unknown identifier {t.value!r}", t.pos, self.text)
        return Expr.var(self.reg, v)

    def arglist(self):
        self.expect("(")
        args = []
        while True:
            tok = self.tok
            if tok.kind != "id":
                raise self.error("expected an identifier argument")
            args.append(self.take())
            if self.tok.value == ",":
                self.take()
                continue
            self.expect(")")
            return args

    def vector(self, tok):
        reg = self.reg
        table = {"x": reg.x, "p": reg.p, "q": reg.q, "pq": reg.pq}
        if tok.value not in table:
            raise ParseError(f"{tok.value!r} is not a vector (expected one of x, p, q, pq)", tok.pos, self.text)
        return table[tok.value]

    def call(self, name_tok):
        name = name_tok.value
        reg = self.reg
        if name == "dot":
            args = self.arglist()
            if len(args) != 2:
                raise ParseError("dot takes exactly two vectors", name_tok.pos, self.text)
            u, w = (self.vector(a) for a in args)
            if len(u) != len(w):
                raise ParseError("dot of vectors with different lengths", name_tok.pos, self.text)
            total = Expr.const(reg, 0)
            for a, b in zip(u, w):
                total = total + Expr.var(reg, a) * Expr.var(reg, b)
            return total
        if name == "D":
            args = self.arglist()
            if not args or args[0].value not in reg.functions:
                raise ParseError("D needs a declared function as first argument", name_tok.pos, self.text)
            fn = reg.functions[args[0].value]
            counts = [0] * len(fn.args)
            names = [a.name for a in fn.args]
            for a in args[1:]:
                if a.value not in names:
                    raise ParseError(f"{a.value!r} is not an argument of {fn.name}", a.pos, self.text)
                counts[names.index(a.value)] += 1
            return Expr.var(reg, reg.derivative(fn.name, tuple(counts)))
        if name in reg.functions:
            fn = reg.functions[name]
            args = self.arglist()
            if len(args) == 1 and args[0].value == "x":
                return Expr.var(reg, reg.derivative(name, (0,) * len(fn.args)))
            if [a.value for a in args] != [a.name for a in fn.args]:
                raise ParseError(
                    f"arity mismatch: {name} takes ({', '.join(a.name for a in fn.args)})",
                    name_tok.pos, self.text)
            return Expr.var(reg, reg.derivative(name, (0,) * len(fn.args)))
        raise ParseError(f"unknown function {name!r}", name_tok.pos, self.text)


def parse(text: str, registry: PhaseSpaceRegistry) -> Expr:
    """Parse ``text`` into a normal-form :class:`Expr`."""
    try:
        return _Parser(text, registry).parse()
    except SymbolicError as exc:
        raise ParseError(str(exc)) from exc


# -- printing ---------------------------------------------------------------

def _fmt_coeff(c) -> str:
    num, den = int(c.numerator), int(c.denominator)
    return str(num) if den == 1 else f"{num}/{den}"


def _fmt_poly(poly, names) -> str:
    if not poly:
        return "0"
    parts = []
    for mono, c in poly.terms():  # descending in the ring order
        factors = []
        for k, ex in enumerate(mono):
            if ex == 1:
                factors.append(names[k])
            elif ex:
                factors.append(f"{names[k]}^{ex}")
        neg = c < 0
        a = -c if neg else c
        if not factors:
            body = _fmt_coeff(a)
        elif a == 1:
            body = "*".join(factors)
        else:
            body = _fmt_coeff(a) + "*" + "*".join(factors)
        if not parts:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts)


def to_string(e: Expr) -> str:
    """Render ``e`` in the parser's grammar."""
    num, den = e._parts()
    names = [v.name for v in e.registry.symbols]
    top = _fmt_poly(num, names)
    if den == den.ring.one:
        return top
    bottom = _fmt_poly(den, names)
    if len(num) > 1 or (len(num) == 1 and "/" in top):
        top = f"({top})"
    if len(den) > 1 or "*" in bottom or "^" in bottom or "/" in bottom:
        bottom = f"({bottom})"
    return f"{top}/{bottom}"
