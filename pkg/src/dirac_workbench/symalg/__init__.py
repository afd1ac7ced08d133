"""Exact symbolic kernel over phase-space variables."""
from .expr import (Expr, SymbolicError, differentiate, equals_zero, evaluate, leading_ratio,
                   substitute)
from .numeric import compile_exprs
from .parser import ParseError, parse, to_string
from .registry import (COORDINATE, DERIVATIVE, MOMENTUM, PARAMETER, FunctionSymbol,
                       PhaseSpaceRegistry, RegistryError, VariableId)

__all__ = [
    "COORDINATE", "DERIVATIVE", "MOMENTUM", "PARAMETER",
    "Expr", "FunctionSymbol", "ParseError", "PhaseSpaceRegistry", "RegistryError",
    "SymbolicError", "VariableId",
    "compile_exprs", "differentiate", "equals_zero", "evaluate", "leading_ratio",
    "parse", "substitute", "to_string",
]
