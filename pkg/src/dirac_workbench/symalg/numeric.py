"""Compile expressions into plain Python float code for repeated evaluation."""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .expr import Expr, SymbolicError
from .registry import VariableId


def _poly_source(poly, names) -> str:
    if not poly:
        return "0.0"
    terms = []
    for mono, c in poly.items():
        factors = [repr(float(c))]
        for k, ex in enumerate(mono):
            if ex == 1:
                factors.append(names[k])
            elif ex:
                factors.append(f"{names[k]}**{ex}")
        terms.append("*".join(factors))
    return " + ".join(terms)


def compile_exprs(exprs: Sequence[Expr], arguments: Sequence[VariableId],
                  constants: Mapping[VariableId, float] | None = None):
    """Return ``f(state) -> ndarray`` evaluating ``exprs``.

    ``arguments`` fixes which state slot each variable reads from; every other
    symbol must be bound in ``constants``.  A vanishing denominator raises
    :class:`SymbolicError` (a pole) instead of returning inf/nan.
    """
    if not exprs:
        return lambda s: np.zeros(0)
    reg = exprs[0].registry
    constants = dict(constants or {})
    slot = {v: k for k, v in enumerate(arguments)}
    names = []
    for k, v in enumerate(reg.symbols):
        names.append(f"_v{k}")
    needed = set()
    for e in exprs:
        needed.update(e.free_variables())
    missing = [v.name for v in needed if v not in slot and v not in constants]
    if missing:
        raise SymbolicError(f"unbound symbols: {', '.join(sorted(missing))}")

    lines = ["def _field(s):"]
    for v in needed:
        k = reg.index(v)
        if v in slot:
            lines.append(f"    {names[k]} = s[{slot[v]}]")
        else:
            lines.append(f"    {names[k]} = {float(constants[v])!r}")
    outs = []
    for j, e in enumerate(exprs):
        num, den = e._parts()
        lines.append(f"    n{j} = {_poly_source(num, names)}")
        if den == den.ring.one:
            outs.append(f"n{j}")
        else:
            lines.append(f"    d{j} = {_poly_source(den, names)}")
            lines.append(f"    if d{j} == 0.0: raise _Pole({j})")
            outs.append(f"n{j} / d{j}")
    lines.append(f"    return _array([{', '.join(outs)}])")
    src = "\n".join(lines)

    class _Pole(SymbolicError):
        def __init__(self, j):
            super().__init__(f"pole: denominator of component {j} vanishes")

    namespace = {"_array": np.array, "_Pole": _Pole}
    exec(compile(src, "<compiled-expressions>", "exec"), namespace)
    fn = namespace["_field"]
    fn.source = src
    return fn
