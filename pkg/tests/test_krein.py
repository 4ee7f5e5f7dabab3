import numpy as np
import pytest
from scipy.integrate import quad

from isl.errors import IndexNonzero
from isl.forward import HalfLineScatteringData, jost_function
from isl.krein import build_H, invert, jost_from_S, recover_q_krein, solve_krein
from isl.numerics import SampledFunction, UniformGrid


def test_trivial_S_gives_trivial_f():
    grid = UniformGrid.from_range(0.02, 20.0, 0.02)
    f = jost_from_S(HalfLineScatteringData(grid, np.ones(grid.count)))
    np.testing.assert_allclose(f.values, 1.0, atol=1e-14)
    H = build_H(f, UniformGrid.from_range(0.0, 2.0, 0.01))
    assert np.all(H.values == 0)


def test_refuses_bound_states(well_data):
    with pytest.raises(IndexNonzero):
        jost_from_S(well_data)
    with pytest.raises(IndexNonzero):
        invert(well_data, 1.0, 0.01)


@pytest.fixture(scope="module")
def krein_f(barrier_data):
    return jost_from_S(barrier_data)


def test_f_matches_forward(barrier_data, krein_f, barrier):
    f_ref = jost_function(barrier, barrier_data.k, with_derivative=False)
    rel = np.abs(krein_f.values - f_ref) / np.abs(f_ref)
    assert np.max(rel) <= 1e-4
    S_back = np.conj(krein_f.values) / krein_f.values
    assert np.max(np.abs(S_back - barrier_data.S)) <= 1e-4


def test_f_tends_to_one(barrier_data, krein_f):
    k = barrier_data.k
    top = k >= 20
    assert np.max(np.abs(np.abs(krein_f.values[top]) - 1) * k[top]) < 1.0


def test_H_even_and_band_oracle(barrier, barrier_data):
    # the band-limited H from the exact |f| against QUADPACK
    f = SampledFunction(barrier_data.k_grid, jost_function(barrier, barrier_data.k, with_derivative=False))
    t_grid = UniformGrid.from_range(0.0, 3.0, 0.1)
    H = build_H(f, t_grid, tail=False)
    assert H.info["asymmetry"] <= 1e-8
    from test_forward import well_oracle

    def G(k):
        fo, _ = well_oracle(k, 1.0)
        return 1 / np.abs(fo) ** 2 - 1

    K = barrier_data.k_grid.stop
    for i in (3, 10, 17, 25):
        t = t_grid.points[i]
        ref = quad(G, 0, K, weight="cos", wvar=t, limit=5000)[0] / np.pi
        assert H.values[i] == pytest.approx(ref, abs=1e-6)


def test_zero_H():
    H = SampledFunction(UniformGrid.from_range(0.0, 2.0, 0.01), np.zeros(201))
    gamma, _ = solve_krein(H, 1.0)
    assert np.all(gamma == 0)
    q, a, _ = recover_q_krein(H, UniformGrid.from_range(0.0, 1.0, 0.01))
    assert np.all(q.samples == 0)


@pytest.mark.parametrize("c", [0.5, -0.3, 2.0])
def test_constant_H(c):
    x = 1.3
    H = SampledFunction(UniformGrid.from_range(0.0, 2.0, 0.01), np.full(201, c))
    gamma, info = solve_krein(H, x)
    np.testing.assert_allclose(gamma, c / (1 + c * x), rtol=1e-12)
    assert info["residual"] <= 1e-9


def test_barrier_round_trip(barrier_data):
    q_hat, ws, a = invert(barrier_data, 1.2, 0.01)
    inside = q_hat.x <= 0.9
    assert np.max(np.abs(q_hat.samples[inside] - 1.0)) <= 5e-2
    assert ws.conditions["symmetry_ok"]
    assert ws.conditions["S_reproduction"] <= 1e-4


def test_H_dump(tmp_path, barrier_data):
    _, ws, _ = invert(barrier_data, 0.5, 0.01)
    ws.save_H(tmp_path / "H.csv")
    lines = (tmp_path / "H.csv").read_text().splitlines()
    assert lines[0] == "t,H" and len(lines) == ws.H.grid.count + 1
