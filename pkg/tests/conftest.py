import os

import pytest

from rsharvest.setups import CI_GRID, ci_problem
from rsharvest.solver import solve_flexible, solve_inflexible

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RSHARVEST_SKIP_FULL"):
        skip = pytest.mark.skip(reason="RSHARVEST_SKIP_FULL is set")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ci():
    return ci_problem()


@pytest.fixture(scope="session")
def ci_flexible(ci):
    return solve_flexible(ci, CI_GRID)


@pytest.fixture(scope="session")
def ci_inflexible(ci):
    return solve_inflexible(ci, CI_GRID)


@pytest.fixture
def record():
    """Store and print one pass/fail line for an acceptance criterion."""

    def _record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _record
