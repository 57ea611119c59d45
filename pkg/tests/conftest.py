import numpy as np
import pytest

from eqlab.field import balayage
from eqlab.grid import GridSpec, bump_measure, make_domain
from eqlab.kernels import Riesz

ACCEPTANCE = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (passed, detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def line_instance():
    """Riesz b=-0.5 on 256 cells of [-2, 2] with U = -W*phi, phi a bump of radius 0.5."""
    g = GridSpec.centered(1, 2.0, 256)
    k = Riesz(1, -0.5)
    phi = bump_measure(g, 0.5)
    U = balayage(k, phi)
    D = make_domain("full_space", g)
    return k, g, phi, U, D
