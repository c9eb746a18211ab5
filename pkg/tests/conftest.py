import numpy as np
import pytest

from tfboost.fda import FunctionalSample, Grid, build_basis


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def unit_grid():
    return Grid.uniform(0.0, 1.0, 100)


@pytest.fixture(scope="session")
def basis01():
    return build_basis((0.0, 1.0))


def smooth_sample(n, grid, rng, noise=0.1, signal=None):
    """Curves from three smooth components with a nonlinear single-index response."""
    t = grid.points
    comps = np.array([np.sin(np.pi * t), np.cos(np.pi * t), t - 0.5])
    X = rng.normal(size=(n, 3)) @ comps
    index = X @ grid.weights()
    f = np.sin(2 * index) if signal is None else signal(index)
    return FunctionalSample(grid, X, response=f + noise * rng.normal(size=n))


@pytest.fixture
def small_problem(unit_grid):
    rng = np.random.default_rng(7)
    return smooth_sample(120, unit_grid, rng), smooth_sample(60, unit_grid, rng)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
