"""Resonances: zeros of the Jost function f(k) = f(0, k) in the lower half plane.

For compactly supported q the Jost function is entire, so zeros in a box are
counted by the argument principle and polished by Newton. Real q makes the
zero set symmetric under k -> -conj(k); that symmetry is checked by searching
the mirrored box separately, not by mirroring the zeros found.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BoundaryZero
from .forward import jost_function
from .numerics import ComplexBox, argument_principle_count, find_zeros_in_box
from .potential import RadialPotential
from .report import write_csv

log = logging.getLogger(__name__)

TOL = 1e-10
# |Im k| <= DEPTH_LEVEL / (2a): e^{2a|Im k|} stays near 1e13
DEPTH_LEVEL = 30.0
RETRIES = 4


@dataclass
class ResonanceSet:
    zeros: list
    residuals: list
    search_box: ComplexBox
    count_by_argument_principle: int
    mirror_zeros: list = field(default_factory=list)
    symmetry_defect: float = 0.0

    def __len__(self) -> int:
        return len(self.zeros)

    def to_dict(self) -> dict:
        b = self.search_box
        return {
            "search_box": {"re_min": b.re_min, "re_max": b.re_max, "im_min": b.im_min, "im_max": b.im_max},
            "count_by_argument_principle": self.count_by_argument_principle,
            "zeros": [{"re_k": z.real, "im_k": z.imag, "residual": r}
                      for z, r in zip(self.zeros, self.residuals)],
            "symmetry_defect": self.symmetry_defect,
        }

    def save_csv(self, path) -> None:
        write_csv(path, ("re_k", "im_k", "residual"),
                  ((float(z.real), float(z.imag), float(r)) for z, r in zip(self.zeros, self.residuals)))


def jost_map(q: RadialPotential):
    """k -> f(0, k) on complex arrays."""
    def f(z):
        return jost_function(q, np.asarray(z, dtype=complex), with_derivative=False)
    return f


def depth_cap(q: RadialPotential) -> float:
    a = q.support_radius
    return math.inf if a <= 0 or q.is_zero else DEPTH_LEVEL / (2 * a)


def _shrunk(box: ComplexBox, attempt: int) -> ComplexBox:
    # irrational-looking offsets so a retry does not land on the same zero
    d = 1e-3 * attempt * np.array([0.7071, 0.5773, 0.8660, 0.4142])
    w, h = box.re_max - box.re_min, box.im_max - box.im_min
    return ComplexBox(box.re_min + d[0] * w, box.re_max - d[1] * w,
                      box.im_min + d[2] * h, box.im_max - d[3] * h)


def _search_box(f, box: ComplexBox, tol: float):
    last = None
    for attempt in range(RETRIES + 1):
        b = box if attempt == 0 else _shrunk(box, attempt)
        try:
            count = argument_principle_count(f, b, tol)
            zeros = find_zeros_in_box(f, b, tol)
            if attempt:
                log.info("box perturbed to %s after a boundary zero", b)
            return b, count, zeros
        except BoundaryZero as exc:
            last = exc
    raise last


def find_resonances(q: RadialPotential, box: ComplexBox, tol: float = TOL,
                    check_mirror: bool = True) -> ResonanceSet:
    """Zeros of f(0, k) inside ``box`` (which must lie in Im k < 0).

    Parameters
    ----------
    q : RadialPotential
        Compactly supported real potential.
    box : ComplexBox
        Search rectangle; its depth is limited to |Im k| <= 30/(2a).
    tol : float
        Each zero is refined until |f| <= tol.
    check_mirror : bool
        Also search the box reflected through the imaginary axis and record
        the largest distance between the two zero sets.

    Raises
    ------
    BoundaryZero
        If every perturbation of the box still has a zero on its boundary.
    CountMismatch
        If refinement loses a zero counted by the argument principle.
    """
    if box.im_max >= 0:
        raise ValueError("resonance boxes must lie in Im k < 0")
    if box.contains(0j):
        raise ValueError("box must exclude k = 0")
    cap = depth_cap(q)
    if -box.im_min > cap:
        raise ValueError(f"box depth {-box.im_min} exceeds the cap {cap:.3g} for support radius {q.support_radius}")
    if q.is_zero:
        return ResonanceSet([], [], box, 0)
    f = jost_map(q)
    used, count, zeros = _search_box(f, box, tol)
    residuals = [float(abs(v)) for v in f(np.array(zeros))] if zeros else []
    out = ResonanceSet(zeros, residuals, used, count)
    if check_mirror:
        mirror = ComplexBox(-used.re_max, -used.re_min, used.im_min, used.im_max)
        _, _, mz = _search_box(f, mirror, tol)
        out.mirror_zeros = mz
        out.symmetry_defect = _pairing_defect(zeros, mz)
    return out


def _pairing_defect(zeros, mirror_zeros) -> float:
    if len(zeros) != len(mirror_zeros):
        return math.inf
    if not zeros:
        return 0.0
    reflected = np.array([-np.conj(z) for z in zeros])
    mz = np.array(mirror_zeros)
    d = np.abs(reflected[:, None] - mz[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def resonance_free_region(resonances: ResonanceSet, b: float, c: float, k_min: float = 2.0,
                          atol: float = 1e-12):
    """Check that no zero with |k| >= k_min lies above Im k = c - b ln|k|.

    Returns ``(ok, margin)`` where margin is the smallest
    c - b ln|k| - Im k over those zeros (+inf when there are none). Zeros on
    the curve to within ``atol`` (the ones it was fitted through) count as
    outside the region.
    """
    margins = [c - b * math.log(abs(z)) - z.imag for z in resonances.zeros if abs(z) >= k_min]
    if not margins:
        return True, math.inf
    m = min(margins)
    return bool(m >= -atol), float(m)


def fit_region_constants(resonances: ResonanceSet, k_min: float = 2.0):
    """(b, c) of the curve Im k = c - b ln|k| through the two largest-|k| zeros."""
    zs = sorted((z for z in resonances.zeros if abs(z) >= k_min), key=abs)
    if len(zs) < 2:
        raise ValueError("need two zeros with |k| >= k_min")
    z1, z2 = zs[-2], zs[-1]
    l1, l2 = math.log(abs(z1)), math.log(abs(z2))
    if abs(l2 - l1) < 1e-12:
        raise ValueError("the two largest zeros have the same modulus")
    b = -(z2.imag - z1.imag) / (l2 - l1)
    c = z1.imag + b * l1
    return b, c


def imaginary_axis_census(q: RadialPotential, depth: float, step: float = 0.01,
                          tau_min: float | None = None) -> list:
    """Purely imaginary resonances k = -iτ, 0 < τ <= depth.

    f(0, -iτ) is real for real q; sign changes on a grid of spacing ``step``
    are polished by bisection. Returns the list of zeros -iτ.
    """
    if q.is_zero:
        return []
    tau_min = step if tau_min is None else tau_min
    taus = np.arange(tau_min, depth + 0.5 * step, step)
    f = jost_map(q)
    vals = np.real(f(-1j * taus))

    def g(t):
        return float(np.real(f(np.array([-1j * t]))[0]))

    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        if vals[i] == 0:
            out.append(-1j * taus[i])
            continue
        if vals[i + 1] == 0:
            continue
        t = brentq(g, taus[i], taus[i + 1], xtol=1e-14, rtol=1e-13)
        out.append(complex(0.0, -t))
    return out


def growth_exponents(q: RadialPotential, depths, re_max: float = 10.0, n: int = 200):
    """log max |f| along Im k = -d, |Re k| <= re_max, for each depth d.

    The slope of these values against d estimates the exponential type of f
    in the lower half plane (2a for a square well of radius a).
    """
    f = jost_map(q)
    re = np.linspace(-re_max, re_max, n)
    out = []
    for d in depths:
        vals = np.abs(f(re - 1j * d))
        out.append(float(np.log(vals.max())))
    return np.array(out)
