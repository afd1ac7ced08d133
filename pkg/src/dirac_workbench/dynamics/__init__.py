"""Numerical integration of the constrained breathing-ring dynamics."""
from ..constraints import run_dirac_bergmann
from .bath import BathSpec, ModeSet, discretize_bath
from .integrators import (SCHEMES, ConstrainedSystem, InitialState, IntegrationError, Trajectory,
                          compile_eom, integrate, model_hash, sample_initial)
from .model import (BREATHING_RING, ModelSpec, PotentialSpec, SymbolicModel, build_symbolic,
                    state_header, state_variables)
from .observables import (OBSERVABLE_COLUMNS, Observables, measure, q_autocorrelation,
                          read_trajectory_csv, write_observables_csv, write_trajectory_csv)


def analyze_model(spec: ModelSpec, modes: int | None = None):
    """Symbolic model plus its Dirac-Bergmann analysis."""
    sm = build_symbolic(spec, modes)
    analysis = run_dirac_bergmann(sm.H, sm.primary, sm.registry, parts={"H_S": sm.H_S, "H_E": sm.H_E})
    return sm, analysis


def make_system(spec: ModelSpec, with_field: bool = True) -> ConstrainedSystem:
    """Numeric system; with ``with_field`` the Dirac vector field is compiled too."""
    field = None
    if with_field:
        sm, analysis = analyze_model(spec)
        field = compile_eom(analysis, sm)
    return ConstrainedSystem(spec, field)


__all__ = [
    "BREATHING_RING", "SCHEMES", "BathSpec", "ConstrainedSystem", "InitialState", "IntegrationError",
    "ModeSet", "ModelSpec", "OBSERVABLE_COLUMNS", "Observables", "PotentialSpec", "SymbolicModel",
    "Trajectory", "analyze_model", "build_symbolic", "compile_eom", "discretize_bath", "integrate",
    "make_system", "measure", "model_hash", "q_autocorrelation", "read_trajectory_csv",
    "sample_initial", "state_header", "state_variables", "write_observables_csv",
    "write_trajectory_csv",
]
