import pytest

from kppw.bvp import Mesh, solve
from kppw.model import catalog_lookup


@pytest.fixture(scope="session")
def classic():
    return catalog_lookup("classic", 2, 1)


@pytest.fixture(scope="session")
def disp11():
    return catalog_lookup("dispersion", 11, 1)


@pytest.fixture(scope="session")
def disp113():
    return catalog_lookup("dispersion", 11, 3)


@pytest.fixture(scope="session")
def she4():
    return catalog_lookup("parabolic", 4, 1)


@pytest.fixture(scope="session")
def profile_113(disp113):
    return solve(disp113, 0.5, Mesh.uniform(n=2000))


@pytest.fixture(scope="session")
def quasi_n1():
    from kppw.quasilinear import solve_quasilinear

    return solve_quasilinear(1, 1.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
