import numpy as np
import pytest

from nematicmin.mesh import FESpace, build_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def director_space(n=8, periodic=True):
    return FESpace(build_mesh(n, n, periodic), "Q2", 3)


def random_director(space, rng, scale=0.3):
    """Smooth-ish random field near unit length."""
    base = np.tile([0.6, 0.0, 0.8], space.n_nodes)
    return base + scale * rng.standard_normal(space.dof_count)


# acceptance criteria report ---------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    """Store the outcome of one acceptance criterion for the summary."""
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
