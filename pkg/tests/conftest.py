import numpy as np
import pytest

from isl.forward import scattering_data
from isl.numerics import UniformGrid
from isl.potential import square_well

K_MAX = 60.0
K_STEP = 0.02


def k_grid(k_max=K_MAX, k_step=K_STEP):
    return UniformGrid.from_range(k_step, k_max, k_step)


def well_sup_error(q_hat, q0, a=1.0, fraction=0.9):
    """sup |q_hat - q0| on [0, fraction*a], on the nodes of q_hat."""
    x = q_hat.x
    inside = x <= fraction * a + 1e-12
    return float(np.max(np.abs(q_hat.samples[inside] - q0)))


@pytest.fixture(scope="session")
def barrier():
    return square_well(1.0, 1.0)


@pytest.fixture(scope="session")
def well():
    return square_well(-4.0, 1.0)


@pytest.fixture(scope="session")
def barrier_data(barrier):
    return scattering_data(barrier, k_grid())


@pytest.fixture(scope="session")
def well_data(well):
    return scattering_data(well, k_grid())


def bump(scale=1.0, a=1.0, steps=None):
    """s (1 - (r/a)²)² on [0, a]; a staircase of ``steps`` midpoint values if given."""
    from isl.potential import from_function, piecewise_constant

    shape = lambda r: scale * (1 - (r / a) ** 2) ** 2
    if steps is None:
        return from_function(shape, a, step=0.005)
    breaks = np.linspace(0.0, a, steps + 1)
    return piecewise_constant(breaks, shape(0.5 * (breaks[1:] + breaks[:-1])))


ACCEPTANCE = []


def criterion(n, ok, detail):
    """Record and assert one acceptance criterion."""
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
