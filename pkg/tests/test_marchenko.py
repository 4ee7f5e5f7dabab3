import numpy as np
import pytest
from scipy.integrate import quad

from conftest import k_grid, well_sup_error
from isl.forward import HalfLineScatteringData, scattering_matrix
from isl.marchenko import (
    build_F,
    characterize,
    check_A0_identity,
    invert,
    marchenko_kernel,
    recover_q_marchenko,
    solve_marchenko,
)
from isl.numerics import SampledFunction, UniformGrid
from isl.potential import square_well

KAPPA, NORM = 1.3, 2.0


def rank_one_A(x, y):
    return -NORM * np.exp(-KAPPA * (x + y)) / (1 + NORM * np.exp(-2 * KAPPA * x) / (2 * KAPPA))


@pytest.fixture(scope="module")
def free_data():
    grid = k_grid(k_max=20.0)
    return HalfLineScatteringData(grid, np.ones(grid.count))


@pytest.fixture(scope="module")
def rank_one_data(free_data):
    return HalfLineScatteringData(free_data.k_grid, free_data.S, [(KAPPA, NORM)])


def test_F_free(free_data):
    F = build_F(free_data, UniformGrid.from_range(0.0, 4.0, 0.01))
    assert np.all(F.values == 0)


def test_F_single_bound_state(rank_one_data):
    grid = UniformGrid.from_range(0.0, 4.0, 0.01)
    F = build_F(rank_one_data, grid)
    np.testing.assert_allclose(F.values, NORM * np.exp(-KAPPA * grid.points), rtol=1e-14)


def test_F_against_adaptive_quadrature(barrier_data):
    # F without tail or taper is (1/π) ∫₀^K Re[(1 - S) e^{ikx}] dk over the sampled band
    from test_forward import well_oracle

    K = barrier_data.k_grid.stop

    def one_minus_S(k):
        f, _ = well_oracle(k, 1.0)
        return 1 - np.conj(f) / f

    x = np.array([0.1, 0.5, 1.0, 1.7, 2.5])
    grid = UniformGrid.from_range(0.0, 3.0, 0.1)
    F = build_F(barrier_data, grid, taper=0.0, tail=False)
    for xv in x:
        re = quad(lambda k: one_minus_S(k).real, 0, K, weight="cos", wvar=xv, limit=4000)[0]
        im = quad(lambda k: one_minus_S(k).imag, 0, K, weight="sin", wvar=xv, limit=4000)[0]
        i = int(round(xv / 0.1))
        assert F.values[i] == pytest.approx((re - im) / np.pi, abs=1e-6)


def test_F_real(barrier_data):
    F = build_F(barrier_data, UniformGrid.from_range(0.0, 4.0, 0.02))
    assert F.info["imag_residue"] <= 1e-8


def test_zero_F_gives_zero_kernel():
    F = SampledFunction(UniformGrid.from_range(0.0, 4.0, 0.01), np.zeros(401))
    _, A, info = solve_marchenko(F, 0.5, 1.5)
    assert np.all(A == 0)
    kernel = marchenko_kernel(F, UniformGrid.from_range(0.0, 1.0, 0.01))
    q = recover_q_marchenko(kernel)
    assert np.all(q.samples == 0)


def test_rank_one_kernel(rank_one_data):
    h = 0.01
    F = build_F(rank_one_data, UniformGrid.from_range(0.0, 16.0, h))
    for x in (0.0, 0.4, 1.0):
        y, A, info = solve_marchenko(F, x, 16.0 - x)
        near = y <= x + 5
        np.testing.assert_allclose(A[near], rank_one_A(x, y[near]), atol=1e-8)
        assert info["residual"] <= 1e-9


def test_rank_one_potential(rank_one_data):
    h = 0.02
    F = build_F(rank_one_data, UniformGrid.from_range(0.0, 18.0, h))
    kernel = marchenko_kernel(F, UniformGrid.from_range(0.0, 2.0, h))
    q = recover_q_marchenko(kernel)
    x = q.x
    # q = -2 d/dx A(x, x) for the closed-form diagonal
    d = 1e-5
    ref = -2 * (rank_one_A(x + d, x + d) - rank_one_A(x - d, x - d)) / (2 * d)
    assert np.max(np.abs(q.samples - ref)) <= 5e-3
    A0 = SampledFunction(UniformGrid(0.0, h, len(kernel.rows[0])), kernel.rows[0])
    assert check_A0_identity(A0, F) <= 1e-6


def test_A0_identity_trivial():
    z = SampledFunction(UniformGrid.from_range(0.0, 1.0, 0.01), np.zeros(101))
    assert check_A0_identity(z, z) == 0.0


def test_characterize_examples(free_data, well_data):
    rep = characterize(free_data)
    assert rep.index == 0 and rep.passed
    rep = characterize(well_data)
    assert rep.index == -2 and rep.index_expected == -2 and rep.passed
    (kj, sj), = well_data.bound_states
    bad = HalfLineScatteringData(well_data.k_grid, well_data.S, [(kj, -sj)])
    rep = characterize(bad)
    assert not rep.passed and "b" in rep.failed_conditions


def test_barrier_round_trip_and_data_reproduction(barrier_data):
    q_hat, kernel, F = invert(barrier_data, 2.0, 0.01)
    assert well_sup_error(q_hat, 1.0) <= 5e-2
    assert kernel.info["max_residual"] <= 1e-9
    assert kernel.info["max_condition_number"] <= 1e8
    A0 = SampledFunction(UniformGrid(0.0, 0.01, len(kernel.rows[0])), kernel.rows[0])
    assert check_A0_identity(A0, F) <= 1e-4
    # forward on the recovered potential reproduces S
    grid = UniformGrid.from_range(0.5, 20.0, 0.5)
    S_ref = scattering_matrix(square_well(1.0), grid).S
    S_hat = scattering_matrix(q_hat, grid).S
    assert np.max(np.abs(S_hat - S_ref)) <= 1e-2
