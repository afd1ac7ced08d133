"""The twelve acceptance criteria, each at its stated tolerance and time limit.

A summary with one PASS/FAIL line per criterion is printed at the end of the
pytest run (see ``conftest.py``).
"""
import pytest

from dirac_workbench.dynamics import ModelSpec
from dirac_workbench.verify import CHECKS, run_check

RESULTS = {}


@pytest.mark.parametrize("number", [c[0] for c in CHECKS], ids=[f"{c[0]:02d}-{c[1].replace(' ', '-')}" for c in CHECKS])
def test_criterion(number):
    result = run_check(number, ModelSpec())
    RESULTS[number] = result
    print(result.line())
    assert result.passed, result.detail
