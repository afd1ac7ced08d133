"""Phase-space variable registry.

The registry owns the polynomial ring every :class:`Expr` lives in.  Its
generators are ordered by elimination precedence

    Q > P > x1 > ... > xd > p1 > ... > pd > q1 > ... > pq1 > ... > parameters > derivative symbols

so that graded-lex leading monomials of the constraint polynomials are the
collective coordinates.  Derivative symbols of declared functions are created
on demand and appended at the end, which keeps the order consistent when the
ring grows.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable

from sympy.polys.domains import QQ
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyRing

COORDINATE = "coordinate"
MOMENTUM = "momentum"
PARAMETER = "parameter"
DERIVATIVE = "function-derivative"


@dataclass(frozen=True)
class VariableId:
    kind: str
    family: str
    index: int | tuple
    name: str

    def __str__(self):
        return self.name

    @property
    def is_phase(self) -> bool:
        return self.kind in (COORDINATE, MOMENTUM)


@dataclass
class FunctionSymbol:
    """Opaque scalar function of coordinate variables.

    ``derivatives`` maps a multi-index (one count per argument) to the symbol
    standing for that partial derivative; the zero multi-index is the function
    value itself.  Using counts makes mixed partials symmetric automatically.
    """

    name: str
    args: tuple[VariableId, ...]
    derivatives: dict[tuple[int, ...], VariableId] = field(default_factory=dict)


class RegistryError(ValueError):
    pass


class PhaseSpaceRegistry:
    """Canonical pairs, parameters and declared functions of a model.

    Parameters
    ----------
    dimension : int
        Number of system coordinates ``x1..xd``.
    modes : int
        Number of bath oscillators ``(q_j, pq_j)``.
    environment : bool
        Whether the collective pair ``(Q, P)`` exists.
    parameters : iterable of str
        Names of symbolic model parameters, in precedence order.
    functions : iterable of str
        Names of opaque scalar functions of ``x``; ``V`` by default.
    """

    def __init__(self, dimension: int, modes: int = 0, environment: bool = True,
                 parameters: Iterable[str] = (), functions: Iterable[str] = ("V",)):
        if dimension < 1:
            raise RegistryError("dimension must be at least 1")
        if modes < 0:
            raise RegistryError("mode count must be nonnegative")
        self.dimension = int(dimension)
        self.modes = int(modes)
        self.environment = bool(environment)
        self._lock = threading.Lock()

        d, n = self.dimension, self.modes
        self.x = tuple(VariableId(COORDINATE, "system-x", i, f"x{i + 1}") for i in range(d))
        self.p = tuple(VariableId(MOMENTUM, "system-p", i, f"p{i + 1}") for i in range(d))
        if self.environment:
            self.Q = VariableId(COORDINATE, "collective-Q", 0, "Q")
            self.P = VariableId(MOMENTUM, "collective-P", 0, "P")
        else:
            self.Q = self.P = None
        self.q = tuple(VariableId(COORDINATE, "bath-q", j, f"q{j + 1}") for j in range(n))
        self.pq = tuple(VariableId(MOMENTUM, "bath-p", j, f"pq{j + 1}") for j in range(n))

        self.pairs: list[tuple[VariableId, VariableId]] = list(zip(self.x, self.p))
        if self.environment:
            self.pairs.append((self.Q, self.P))
        self.pairs.extend(zip(self.q, self.pq))

        phase = ([self.Q, self.P] if self.environment else []) + list(self.x) + list(self.p) \
            + list(self.q) + list(self.pq)
        self.phase_variables: tuple[VariableId, ...] = tuple(phase)

        names = list(dict.fromkeys(parameters))
        self.parameters = {nm: VariableId(PARAMETER, "named-parameter", k, nm) for k, nm in enumerate(names)}
        reserved = {v.name for v in phase} | {"dot", "D", "x", "p", "q", "pq"}
        clash = reserved & set(names)
        if clash:
            raise RegistryError(f"parameter names collide with reserved identifiers: {sorted(clash)}")

        self.functions: dict[str, FunctionSymbol] = {}
        self._symbols: list[VariableId] = phase + list(self.parameters.values())
        for fname in functions:
            if fname in reserved or fname in self.parameters:
                raise RegistryError(f"function name {fname!r} is already taken")
            self.functions[fname] = FunctionSymbol(fname, self.x)
        self._index = {v: k for k, v in enumerate(self._symbols)}
        self._ring = self._make_ring()
        for fname in self.functions:
            self.derivative(fname, (0,) * d)

    # -- lookup -----------------------------------------------------------
    def _make_ring(self) -> PolyRing:
        return PolyRing([_ring_name(v) for v in self._symbols], QQ, grlex)

    @property
    def ring(self) -> PolyRing:
        return self._ring

    @property
    def symbols(self) -> tuple[VariableId, ...]:
        return tuple(self._symbols)

    @property
    def n_phase(self) -> int:
        return len(self.phase_variables)

    def index(self, v: VariableId) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise RegistryError(f"variable {v} is not declared in this registry") from None

    def gen(self, v: VariableId):
        return self._ring.gens[self.index(v)]

    def lookup(self, name: str) -> VariableId:
        for v in self._symbols:
            if v.name == name:
                return v
        raise RegistryError(f"unknown identifier {name!r}")

    def param(self, name: str) -> VariableId:
        return self.parameters[name]

    def partner(self, v: VariableId) -> VariableId:
        for a, b in self.pairs:
            if v == a:
                return b
            if v == b:
                return a
        raise RegistryError(f"{v} is not part of a canonical pair")

    # -- derivative symbols ----------------------------------------------
    def derivative(self, fname: str, multi_index: tuple[int, ...]) -> VariableId:
        """Symbol for the partial derivative of ``fname`` with the given counts."""
        fn = self.functions[fname]
        multi_index = tuple(int(k) for k in multi_index)
        if len(multi_index) != len(fn.args) or min(multi_index, default=0) < 0:
            raise RegistryError(f"bad multi-index {multi_index} for {fname}")
        sym = fn.derivatives.get(multi_index)
        if sym is not None:
            return sym
        with self._lock:
            sym = fn.derivatives.get(multi_index)
            if sym is None:
                sym = VariableId(DERIVATIVE, f"derivative-of-{fname}", multi_index,
                                 _derivative_display(fn, multi_index))
                fn.derivatives[multi_index] = sym
                self._index[sym] = len(self._symbols)
                self._symbols.append(sym)
                self._ring = self._make_ring()
        return sym

    def derivative_info(self, v: VariableId) -> tuple[FunctionSymbol, tuple[int, ...]]:
        fname = v.family[len("derivative-of-"):]
        return self.functions[fname], v.index

    def lift(self, poly):
        """Re-express ``poly`` in the current ring (generators only ever get appended)."""
        ring = self._ring
        if poly.ring is ring:
            return poly
        pad = (0,) * (ring.ngens - poly.ring.ngens)
        if poly.ring.symbols != ring.symbols[:poly.ring.ngens]:
            raise RegistryError("polynomial does not belong to this registry")
        return ring.from_dict({m + pad: c for m, c in poly.items()})

    def __repr__(self):
        return (f"PhaseSpaceRegistry(d={self.dimension}, modes={self.modes}, "
                f"environment={self.environment}, parameters={list(self.parameters)})")


def _ring_name(v: VariableId) -> str:
    if v.kind == DERIVATIVE:
        fname = v.family[len("derivative-of-"):]
        return fname + "__" + "_".join(str(k) for k in v.index)
    return v.name


def _derivative_display(fn: FunctionSymbol, multi_index) -> str:
    if not any(multi_index):
        return f"{fn.name}(x)"
    args = []
    for arg, count in zip(fn.args, multi_index):
        args.extend([arg.name] * count)
    return f"D({fn.name},{','.join(args)})"
