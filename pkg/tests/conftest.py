import numpy as np
import pytest

from capstab.conformal_metric import ConformalFactor, eta_family
from capstab.liouville import solve_comparison
from capstab.model_cap import model_factor
from capstab.polar_grid import GridField, PolarGrid

SWEEP = (0.5, 0.2, 0.1, 0.05, 0.02, 0.01)


@pytest.fixture(scope="session")
def grid64():
    return PolarGrid(64, 64)


@pytest.fixture(scope="session")
def grid128():
    return PolarGrid(128, 128)


@pytest.fixture(scope="session")
def flat64(grid64):
    return ConformalFactor(GridField.constant(grid64, 0.0), 0.0, "flat")


@pytest.fixture(scope="session")
def rho0_64(grid64):
    return ConformalFactor(model_factor(0.0, grid64), 0.0, "hemisphere")


@pytest.fixture(scope="session")
def rho1_64(grid64):
    return ConformalFactor(model_factor(1.0, grid64), 1.0, "model")


@pytest.fixture(scope="session")
def sweep64(grid64):
    """(eta, u, comparison solution) for the standard sweep at grid 64."""
    out = []
    for eta in SWEEP:
        u = eta_family(1.0, eta, grid64)
        out.append((eta, u, solve_comparison(u)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
