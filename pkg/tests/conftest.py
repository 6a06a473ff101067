import functools

import pytest
from hypothesis import HealthCheck, settings

from sandpile_patterns.continuum import ifs_generate
from sandpile_patterns.grid import ShapeSpec, build_mask
from sandpile_patterns.solver import solve_least

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def unit_solution(n: int):
    return solve_least(build_mask(ShapeSpec.unit_square(), n))


@functools.lru_cache(maxsize=None)
def supersolution(depth: int):
    return ifs_generate(depth)


@pytest.fixture(scope="session")
def solved():
    return unit_solution


@pytest.fixture(scope="session")
def ss_cache():
    return supersolution


# acceptance criteria record (id -> (passed, detail)) and print one line each
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
