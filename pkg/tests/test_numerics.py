import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isl.errors import BoundaryZero, SingularSystem, UnderResolvedContour
from isl.numerics import (
    ComplexBox,
    SampledFunction,
    UniformGrid,
    argument_principle_count,
    derivative,
    find_zeros_in_box,
    oscillatory_fourier,
    quadrature_weights,
    solve_second_kind,
    winding_number,
)


def test_grid_from_range_includes_stop():
    g = UniformGrid.from_range(0.0, 1.0, 0.01)
    assert g.count == 101
    assert g.stop == pytest.approx(1.0)


def test_grid_rejects_bad_step():
    with pytest.raises(ValueError):
        UniformGrid(0.0, 0.0, 10)


def test_rank_one_kernel():
    # g + ∫₀¹ g = 1 gives g = 1/2; g(t) + ∫₀¹ t s g(s) ds = t gives g = 3t/4
    grid = UniformGrid.from_range(0.0, 1.0, 0.01)
    t = grid.points
    g = solve_second_kind(lambda t, s: np.ones_like(t * s), SampledFunction(grid, np.ones_like(t)))
    np.testing.assert_allclose(g.values, 0.5, atol=1e-12)
    g = solve_second_kind(lambda t, s: t * s, SampledFunction(grid, t), rule="gregory")
    np.testing.assert_allclose(g.values, 0.75 * t, atol=1e-8)


def test_zero_kernel_returns_rhs():
    grid = UniformGrid.from_range(0.0, 2.0, 0.05)
    rhs = SampledFunction(grid, np.sin(grid.points))
    g = solve_second_kind(np.zeros((grid.count, grid.count)), rhs)
    np.testing.assert_array_equal(g.values, rhs.values)
    assert g.info["residual"] == 0.0


def test_matches_dense_solve():
    rng = np.random.default_rng(1)
    grid = UniformGrid.from_range(0.0, 1.0, 0.02)
    kmat = rng.normal(size=(grid.count, grid.count))
    rhs = rng.normal(size=grid.count)
    w = quadrature_weights(grid.count, grid.step)
    ref = np.linalg.solve(np.eye(grid.count) + kmat * w[None, :], rhs)
    g = solve_second_kind(kmat, SampledFunction(grid, rhs))
    np.testing.assert_allclose(g.values, ref, rtol=1e-10, atol=1e-12)
    assert g.info["residual"] < 1e-12


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_singular_system_raises():
    # I + K W = 0 for K = -1/w on the diagonal
    grid = UniformGrid.from_range(0.0, 1.0, 0.25)
    w = quadrature_weights(grid.count, grid.step)
    with pytest.raises(SingularSystem):
        solve_second_kind(-np.diag(1 / w), SampledFunction(grid, np.ones(grid.count)))


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_solver_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    grid = UniformGrid.from_range(0.0, 1.0, 0.05)
    kmat = 0.5 * rng.normal(size=(grid.count, grid.count))
    f1, f2 = rng.normal(size=(2, grid.count))
    g1 = solve_second_kind(kmat, SampledFunction(grid, f1)).values
    g2 = solve_second_kind(kmat, SampledFunction(grid, f2)).values
    g = solve_second_kind(kmat, SampledFunction(grid, a * f1 + b * f2)).values
    np.testing.assert_allclose(g, a * g1 + b * g2, atol=1e-9 * (1 + abs(a) + abs(b)))


def test_gregory_exact_for_cubics():
    n, h = 41, 0.05
    x = h * np.arange(n)
    w = quadrature_weights(n, h, "gregory")
    for p in range(4):
        assert w @ x**p == pytest.approx(x[-1] ** (p + 1) / (p + 1), rel=1e-12)


def test_derivative_fourth_order():
    errs = []
    for h in (0.02, 0.01):
        x = np.arange(0.0, 1.0 + h / 2, h)
        errs.append(np.max(np.abs(derivative(np.sin(3 * x), h) - 3 * np.cos(3 * x))))
    assert errs[0] / errs[1] > 12


def test_fourier_gaussian():
    # (1/2π)∫ e^{-k²/2} e^{ikx} dk = e^{-x²/2}/√(2π)
    x = np.linspace(0.0, 5.0, 51)
    ref = np.exp(-x**2 / 2) / np.sqrt(2 * np.pi)
    errs = []
    for h in (0.05, 0.025):
        grid = UniformGrid.from_range(0.0, 12.0, h)
        g = SampledFunction(grid, np.exp(-grid.points**2 / 2))
        val = oscillatory_fourier(g, x, symmetry="even-real", tail=False)
        errs.append(np.max(np.abs(val.real - ref)))
    assert errs[0] < 1e-6
    assert errs[0] / errs[1] > 6


def test_fourier_algebraic_tail():
    # (1/2π)∫ e^{ikx}/(1+k²) dk = e^{-|x|}/2
    grid = UniformGrid.from_range(0.0, 60.0, 0.02)
    g = SampledFunction(grid, 1 / (1 + grid.points**2))
    x = np.linspace(0.05, 4.0, 40)
    val = oscillatory_fourier(g, x, symmetry="even-real")
    np.testing.assert_allclose(val.real, 0.5 * np.exp(-x), atol=1e-6)


def test_fourier_hermitian_causal():
    # 1/(1 - ik) has its pole in the lower half plane: transform e^{x} for x < 0, 0 for x > 0
    grid = UniformGrid.from_range(0.0, 60.0, 0.02)
    k = grid.points
    g = SampledFunction(grid, 1 / (1 - 1j * k))
    x = np.array([-2.0, -1.0, -0.3, 0.3, 1.0, 2.0])
    val = oscillatory_fourier(g, x, symmetry="hermitian")
    ref = np.where(x < 0, np.exp(x), 0.0)
    np.testing.assert_allclose(val.real, ref, atol=1e-4)
    assert np.max(np.abs(val.imag)) < 1e-12


def test_winding_number():
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    assert winding_number(np.exp(1j * t)) == 1
    assert winding_number(np.exp(-2j * t)) == -2
    assert winding_number(2 + np.exp(1j * t)) == 0
    with pytest.raises(UnderResolvedContour):
        winding_number(np.exp(1j * t[::40] * 3))


def test_find_zeros_simple():
    box = ComplexBox(0.0, 2.0, 0.0, 2.0)
    f = lambda z: z - (1 + 1j)
    assert argument_principle_count(f, box) == 1
    (z,) = find_zeros_in_box(f, box)
    assert abs(z - (1 + 1j)) < 1e-12


def test_find_zeros_pair():
    box = ComplexBox(-0.7, 0.9, -2.1, 1.9)
    zs = sorted(find_zeros_in_box(lambda z: z * z + 1, box), key=lambda z: z.imag)
    assert len(zs) == 2
    np.testing.assert_allclose(zs, [-1j, 1j], atol=1e-12)


def test_boundary_zero():
    with pytest.raises(BoundaryZero):
        argument_principle_count(lambda z: z - 1, ComplexBox(1.0, 2.0, -1.0, 1.0))
