import sys

import pytest
from hypothesis import HealthCheck, settings

from dirac_workbench.dynamics import ModelSpec, analyze_model

# exact rational arithmetic has uneven cost per example; deadlines would only add noise
settings.register_profile("workbench", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("workbench")


@pytest.fixture(scope="session")
def ring():
    """Ring model with opaque V and no bath: (symbolic model, analysis)."""
    return analyze_model(ModelSpec())


@pytest.fixture(scope="session")
def ring_bath():
    return analyze_model(ModelSpec(bath={"modes": 2}))


@pytest.fixture(scope="session")
def harmonic():
    return analyze_model(ModelSpec(potential={"kind": "harmonic"}))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number].line())
