import numpy as np
import pytest

from llbdf2 import VectorField, make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(grid, rng, unit=False):
    values = rng.standard_normal(grid.interior_shape + (3,))
    if unit:
        values /= np.linalg.norm(values, axis=-1, keepdims=True)
    return VectorField.from_interior(grid, values)


@pytest.fixture(params=[1, 3], ids=["1d", "3d"])
def small_grid(request):
    if request.param == 1:
        return make_grid(1, 11, 1.0)
    return make_grid(3, (5, 4, 6), (1.0, 0.8, 1.3))


# Per-criterion verdicts from test_acceptance.py, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
