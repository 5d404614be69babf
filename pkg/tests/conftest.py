import math

import pytest

from nwcollapse.correlators import DiluteNR, Thermal, Unparticle, WhiteCSL
from nwcollapse.rates import ParticleGroup, SuperpositionConfig

# Acceptance lines collected by tests/test_acceptance.py and printed at the end.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def white():
    return WhiteCSL(gamma=1.0, r_C=1.0)


@pytest.fixture
def dilute():
    return DiluteNR(mu=1.0, T=0.01)


@pytest.fixture
def thermal():
    return Thermal(mu=1.0, T=0.1, zeta=-0.5)


@pytest.fixture
def unparticle():
    return Unparticle(d=1.5, Lambda=1.0, T=1.0, zeta=-0.5)


def two_branch(separation=50.0, p1=0.5, coupling=1.0):
    g = ParticleGroup.single(0.0, coupling)
    return SuperpositionConfig((g, g.displaced([separation, 0.0, 0.0])), (p1, 1.0 - p1))


def four_branch(spacing=3.0):
    base = ParticleGroup([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], [1.0, 1.0])
    groups = tuple(base.displaced([k * spacing, 0.5 * k, 0.0]) for k in range(4))
    return SuperpositionConfig(groups, (0.4, 0.3, 0.2, 0.1))


@pytest.fixture
def pair():
    return two_branch()


@pytest.fixture
def quad():
    return four_branch()


INF = math.inf
