import numpy as np
import pytest
from hypothesis import settings

from jacobi_ldp.core import LimitParams
from jacobi_ldp.equilibrium import solve_equilibrium

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def sol111():
    return solve_equilibrium(LimitParams(1, 1, 1), cells=1024)


@pytest.fixture(scope="session")
def sol100():
    return solve_equilibrium(LimitParams(1, 0, 0), cells=512)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
