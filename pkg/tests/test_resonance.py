import math

import numpy as np
import pytest
from scipy.optimize import newton

from isl.numerics import ComplexBox, find_zeros_in_box
from isl.potential import square_well, zero_potential
from isl.resonance import (
    depth_cap,
    find_resonances,
    fit_region_constants,
    growth_exponents,
    imaginary_axis_census,
    jost_map,
    resonance_free_region,
)

BOX = ComplexBox(0.5, 6.0, -3.0, -0.01)


def well_g(k, q0=1.0, a=1.0):
    """e^{-ika} f(0, k) of the square well, entire in k."""
    kap = np.sqrt(k * k - q0 + 0j)
    return np.cos(kap * a) - 1j * k * a * np.sinc(kap * a / np.pi)


def oracle_roots(box, q0=1.0):
    """Roots of the matching equation by complex Newton from a grid of seeds."""
    roots = []
    for re in np.linspace(box.re_min, box.re_max, 23):
        for im in np.linspace(box.im_min, box.im_max, 13):
            try:
                z = newton(lambda k: well_g(k, q0), complex(re, im), tol=1e-14, maxiter=100)
            except RuntimeError:
                continue
            if box.contains(z) and abs(well_g(z, q0)) < 1e-10 and all(abs(z - r) > 1e-6 for r in roots):
                roots.append(z)
    return sorted(roots, key=lambda z: z.real)


@pytest.fixture(scope="module")
def barrier_resonances():
    return find_resonances(square_well(1.0, 1.0), BOX)


def test_free_has_no_resonances():
    rs = find_resonances(zero_potential(), BOX)
    assert len(rs) == 0 and rs.count_by_argument_principle == 0


def test_square_well_oracle(barrier_resonances):
    rs = barrier_resonances
    ref = oracle_roots(BOX)
    assert len(rs) == len(ref) == rs.count_by_argument_principle
    got = sorted(rs.zeros, key=lambda z: z.real)
    np.testing.assert_allclose(got, ref, atol=1e-6)
    assert max(rs.residuals) <= 1e-10


def test_mirror_symmetry(barrier_resonances):
    rs = barrier_resonances
    assert len(rs.mirror_zeros) == len(rs.zeros)
    assert rs.symmetry_defect <= 1e-8


def test_box_validation():
    q = square_well(1.0)
    with pytest.raises(ValueError):
        find_resonances(q, ComplexBox(0.5, 6.0, -3.0, 0.5))
    with pytest.raises(ValueError):
        find_resonances(q, ComplexBox(0.5, 6.0, -depth_cap(q) - 1, -0.01))


def test_no_zeros_in_upper_half_plane_off_axis():
    for q0 in (1.0, -4.0):
        f = jost_map(square_well(q0))
        assert find_zeros_in_box(f, ComplexBox(0.3, 8.0, 0.05, 4.0)) == []
        assert find_zeros_in_box(f, ComplexBox(-8.0, -0.3, 0.05, 4.0)) == []


def test_region_examples(barrier_resonances):
    empty = find_resonances(zero_potential(), BOX)
    assert resonance_free_region(empty, 1.0, 0.0) == (True, math.inf)
    ok, margin = resonance_free_region(barrier_resonances, 1.0, -1e6)
    assert not ok and margin < 0


def test_region_fit_then_check(barrier_resonances):
    b, c = fit_region_constants(barrier_resonances)
    ok, margin = resonance_free_region(barrier_resonances, b, c)
    assert ok and margin == pytest.approx(0.0, abs=1e-12)


def test_region_slope_is_inverse_radius():
    # large-|k| barrier resonances follow Im k ≈ c - ln|k|/a
    rs = find_resonances(square_well(1.0, 1.0), ComplexBox(0.5, 15.0, -4.0, -0.01))
    assert len(rs) >= 4
    b, c = fit_region_constants(rs)
    assert b == pytest.approx(1.0, abs=0.1)
    # earlier zeros approach that line from above, so its margin shrinks with |k|
    zs = sorted(rs.zeros, key=abs)
    m = [c - b * math.log(abs(z)) - z.imag for z in zs]
    assert all(x < y for x, y in zip(m[:-2], m[1:-1]))


def test_imaginary_axis_census():
    assert imaginary_axis_census(zero_potential(), 10.0) == []
    q = square_well(1.0)
    coarse = imaginary_axis_census(q, 10.0)
    fine = imaginary_axis_census(q, 10.0, step=0.005)
    assert len(coarse) == len(fine) <= 3
    np.testing.assert_allclose(coarse, fine, atol=1e-10)


def test_exponential_type():
    q = square_well(1.0)
    depths = np.arange(1.0, 8.0)
    g = growth_exponents(q, depths)
    a = q.support_radius
    C = np.max(g - 2 * a * depths)
    assert C < 1.0
    slope = np.polyfit(depths, g, 1)[0]
    assert slope <= 2 * a + 0.05


def test_csv(tmp_path, barrier_resonances):
    barrier_resonances.save_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "re_k,im_k,residual"
    assert len(lines) == len(barrier_resonances) + 1
