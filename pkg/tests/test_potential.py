import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isl.errors import FormatError, NonRealError
from isl.potential import (
    from_function,
    load_potential,
    moments,
    piecewise_constant,
    save_potential,
    square_well,
    zero_potential,
)


def write_csv(path, x, q):
    lines = ["x,q"] + [f"{a:.12g},{b:.17g}" for a, b in zip(x, q)]
    path.write_text("\n".join(lines) + "\n")


def test_save_load_roundtrip(tmp_path):
    q = square_well(-4.0, 1.0, x_max=2.0)
    save_potential(q, tmp_path / "q.csv")
    back = load_potential(tmp_path / "q.csv")
    assert back.support_radius == pytest.approx(1.0)
    np.testing.assert_array_equal(back.samples, q.samples)
    assert back.grid.count == q.grid.count


def test_square_well_file_support(tmp_path):
    x = np.round(np.arange(201) * 0.01, 12)
    write_csv(tmp_path / "w.csv", x, np.where(x <= 1.0, 1.0, 0.0))
    q = load_potential(tmp_path / "w.csv")
    assert q.support_radius == pytest.approx(1.0)
    assert np.all(q.samples[q.x > q.support_radius] == 0)


def test_zero_file_falls_back_to_x_max(tmp_path, caplog):
    x = np.round(np.arange(201) * 0.01, 12)
    write_csv(tmp_path / "z.csv", x, np.zeros_like(x))
    with caplog.at_level(logging.WARNING):
        q = load_potential(tmp_path / "z.csv")
    assert q.is_zero
    assert q.support_radius == pytest.approx(2.0)
    assert "x_max" in caplog.text


def test_jittered_grid_rejected(tmp_path):
    x = np.round(np.arange(101) * 0.01, 12)
    x[50] += 1e-6
    write_csv(tmp_path / "j.csv", x, np.ones_like(x))
    with pytest.raises(FormatError):
        load_potential(tmp_path / "j.csv")


def test_complex_entry_rejected(tmp_path):
    (tmp_path / "c.csv").write_text("x,q\n0,1\n0.5,1+2j\n1,0\n")
    with pytest.raises(NonRealError):
        load_potential(tmp_path / "c.csv")


def test_bad_header_and_text(tmp_path):
    (tmp_path / "h.csv").write_text("r,v\n0,1\n1,0\n")
    with pytest.raises(FormatError):
        load_potential(tmp_path / "h.csv")
    (tmp_path / "t.csv").write_text("x,q\n0,1\n1,abc\n")
    with pytest.raises(FormatError):
        load_potential(tmp_path / "t.csv")


def test_piecewise_evaluation():
    q = piecewise_constant([0.0, 0.5, 1.0], [2.0, -1.0])
    np.testing.assert_array_equal(q(np.array([0.2, 0.7, 1.5])), [2.0, -1.0, 0.0])
    assert q.segments() == [(0.0, 0.5), (0.5, 1.0)]


def test_moments_zero():
    assert all(r.Q_n == 0 for r in moments(zero_potential(), 20))


def test_moments_unit_barrier():
    reps = moments(square_well(1.0, 1.0), 30)
    np.testing.assert_allclose([r.Q_n for r in reps], 1 / (np.arange(31) + 1), rtol=1e-12)
    # Q_n = 1/(n+1) has b = 0 < 1: compact support implies infinitely many resonances
    assert reps[0].infinitely_many_resonances


def test_moments_gaussian_flag():
    q = from_function(lambda x: np.exp(-x**2), 8.0, x_max=8.0, step=0.005)
    rep = moments(q, 60)[-1]
    assert rep.growth_exponent_b == pytest.approx(0.5, abs=0.02)
    assert rep.infinitely_many_resonances


def test_moments_range():
    with pytest.raises(ValueError):
        moments(square_well(1.0), 201)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4), st.floats(0.0, 1.0))
def test_moments_monotone(heights, shrink):
    breaks = np.linspace(0.0, 1.0, len(heights) + 1)
    q2 = piecewise_constant(breaks, heights)
    q1 = piecewise_constant(breaks, [shrink * h for h in heights])
    Q1 = [r.Q_n for r in moments(q1, 12)]
    Q2 = [r.Q_n for r in moments(q2, 12)]
    assert all(a <= b * (1 + 1e-12) + 1e-300 for a, b in zip(Q1, Q2))
