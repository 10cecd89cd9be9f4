"""Shared fixtures: the reference configuration and its solved states.

Reference configuration: N = 5, p = 3.8, mu = 1 and the mass at half the
admissibility threshold for the estimated GN constant.
"""

import pytest

from normbiharm.analytic import ProblemParams, reference_mass
from normbiharm.solve import gn_constant_estimate, solve_ground, solve_limit, solve_mountain_pass

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def gn_estimate():
    return gn_constant_estimate(5, 3.8)


@pytest.fixture(scope="session")
def gn(gn_estimate):
    return gn_estimate.constant


@pytest.fixture(scope="session")
def ref_params(gn):
    return ProblemParams(5, 3.8, reference_mass(5, 3.8, 1.0, gn), 1.0)


@pytest.fixture(scope="session")
def ground(ref_params, gn):
    return solve_ground(ref_params, gn)


@pytest.fixture(scope="session")
def mountain(ref_params, gn):
    return solve_mountain_pass(ref_params, gn)


@pytest.fixture(scope="session")
def limit(ref_params):
    return solve_limit(ref_params)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
