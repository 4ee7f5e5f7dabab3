"""Fixed-energy phase-shift ambiguity: two visibly different piecewise-constant
potentials with nearly the same phase shifts δ_0..δ_L at one k."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import spherical_jn, spherical_yn

from .errors import BudgetExhausted
from .forward import phase_shifts
from .potential import RadialPotential, piecewise_constant
from .report import write_json

log = logging.getLogger(__name__)

MAX_PIECES = 4
HEIGHT_BOUND = 4.0
RESTART_EVALS = 500


@dataclass
class AmbiguityPair:
    q1: RadialPotential
    q2: RadialPotential
    k: float
    L: int
    phase_gap: float
    potential_gap: float
    evaluations: int = 0
    target_met: bool = True

    def to_dict(self) -> dict:
        def pc(q):
            return {"breaks": list(q.breaks), "heights": list(q.heights)}
        return {"k": self.k, "L": self.L, "q1": pc(self.q1), "q2": pc(self.q2),
                "phase_gap": self.phase_gap, "potential_gap": self.potential_gap}

    def save(self, path) -> None:
        write_json(path, self.to_dict())


def _wrapped(d: np.ndarray) -> np.ndarray:
    # phase shifts are defined mod π
    return np.angle(np.exp(2j * d)) / 2


def phase_gap(q1: RadialPotential, q2: RadialPotential, k: float, L: int) -> float:
    """max_{ℓ <= L} |δ_ℓ(q1) - δ_ℓ(q2)| (mod π) from fresh forward solves."""
    d1 = phase_shifts(q1, k, L).delta
    d2 = phase_shifts(q2, k, L).delta
    return float(np.max(np.abs(_wrapped(d1 - d2))))


def evaluate_pair(q1: RadialPotential, q2: RadialPotential, k: float, L: int,
                  min_potential_gap: float = 0.0) -> AmbiguityPair:
    """Pair with both gaps computed from scratch; rejects q2 = q1 and pairs
    closer than ``min_potential_gap``."""
    if not (q1.is_piecewise and q2.is_piecewise):
        raise ValueError("both potentials must be piecewise constant")
    if len(q1.heights) > MAX_PIECES or len(q2.heights) > MAX_PIECES:
        raise ValueError(f"at most {MAX_PIECES} pieces per potential")
    vg = potential_gap(q1, q2)
    if vg == 0 or vg < min_potential_gap:
        raise ValueError(f"potential gap {vg:.3g} violates the constraint (>= {min_potential_gap:g}, q1 != q2)")
    return AmbiguityPair(q1, q2, float(k), int(L), phase_gap(q1, q2, k, L), vg)


def _riccati(ell, z):
    j, y = spherical_jn(ell, z), spherical_yn(ell, z)
    jp, yp = spherical_jn(ell, z, derivative=True), spherical_yn(ell, z, derivative=True)
    return z * j, j + z * jp, z * y, y + z * yp


def matching_phase_shifts(breaks, heights, k: float, L: int) -> np.ndarray:
    """δ_ℓ of a piecewise-constant potential by Riccati-Bessel matching.

    Exact up to rounding, but shifts below ~1e-16 lose relative precision;
    used to drive the search, never to report gaps.
    """
    ell = np.arange(L + 1)
    psi = dpsi = None
    for lo, hi, h in zip(breaks[:-1], breaks[1:], heights):
        kap = np.sqrt(complex(k * k - h))
        if abs(kap) < 1e-8:
            kap = 1e-8
        if psi is None:
            u, up, _, _ = _riccati(ell, kap * hi)
            psi, dpsi = u, kap * up
            continue
        u0, up0, v0, vp0 = _riccati(ell, kap * lo)
        # u v' - u' v = 1 in the variable κr
        A = (psi * vp0 * kap - dpsi * v0) / kap
        B = (dpsi * u0 - psi * up0 * kap) / kap
        u1, up1, v1, vp1 = _riccati(ell, kap * hi)
        psi, dpsi = A * u1 + B * v1, kap * (A * up1 + B * vp1)
    u, up, v, vp = _riccati(ell, k * breaks[-1])
    R = dpsi / psi
    return np.arctan(np.real((R * u - k * up) / (R * v - k * vp)))


def potential_gap(q1: RadialPotential, q2: RadialPotential) -> float:
    """sup |q1 - q2| for piecewise-constant potentials (checked on every piece)."""
    edges = sorted(set(q1.breaks) | set(q2.breaks))
    mids = 0.5 * (np.array(edges[1:]) + np.array(edges[:-1]))
    return float(np.max(np.abs(q1(mids) - q2(mids)))) if mids.size else 0.0


def _decode(p: np.ndarray, q1: RadialPotential, n: int, piece: int, sign: float, gap: float):
    """Parameters -> (breaks, heights); piece ``piece`` sits at
    q1(midpoint) + sign (gap + t²), so the potential gap constraint holds."""
    a = q1.support_radius
    t, free, inner = p[0], p[1:n], np.sort(p[n:]) * a
    breaks = [0.0, *inner.tolist(), a]
    base = float(q1(0.5 * (breaks[piece] + breaks[piece + 1])))
    heights = np.insert(free, piece, base + sign * (gap + t * t))
    return breaks, heights.tolist()


def _build(breaks, heights) -> RadialPotential | None:
    # drop pieces squeezed below the grid resolution
    keep_b, keep_h = [breaks[0]], []
    for b, h in zip(breaks[1:], heights):
        if b - keep_b[-1] > 1e-6:
            keep_b.append(b)
            keep_h.append(h)
    if not keep_h:
        return None
    keep_b[-1] = breaks[-1]
    return piecewise_constant(keep_b, keep_h)


def search_ambiguous_pair(q1: RadialPotential | None = None, k: float = 1.0, L: int = 15,
                          target_phase_gap: float = 1e-3, min_potential_gap: float = 0.5,
                          budget: int = 5000, seed: int = 0, n_pieces: int = MAX_PIECES,
                          strict: bool = False) -> AmbiguityPair:
    """Search heights and break points of q2 (same support as q1) so that
    its phase shifts match those of q1 while sup|q1 - q2| >= min_potential_gap.

    Powell's derivative-free direction-set search on the squared phase
    mismatch (shifts by Riccati-Bessel matching). One piece of q2 is pinned
    at distance >= min_potential_gap from q1's value there, so the
    constraint holds by construction; restarts cycle through the pinned
    piece and the sign of the offset, from seeded random points near q1,
    until the target is met or
    ``budget`` objective evaluations are spent. Both gaps of the returned
    pair are recomputed from scratch.

    Raises
    ------
    BudgetExhausted
        Only with ``strict``; otherwise the best pair is returned with
        ``target_met = False``.
    """
    if L < 10:
        raise ValueError("L must be at least 10")
    if not 1 <= n_pieces <= MAX_PIECES:
        raise ValueError(f"q2 has 1..{MAX_PIECES} pieces")
    q1 = piecewise_constant([0.0, 1.0], [1.0]) if q1 is None else q1
    if not q1.is_piecewise:
        raise ValueError("q1 must be piecewise constant")
    a = q1.support_radius
    target = matching_phase_shifts(q1.breaks, q1.heights, k, L)
    rng = np.random.default_rng(seed)
    n = n_pieces
    used = 0

    base = float(np.mean(q1.heights))

    def objective(p, piece, sign):
        nonlocal used
        used += 1
        q2 = _build(*_decode(p, q1, n, piece, sign, min_potential_gap))
        if q2 is None:
            return 1e3
        d = _wrapped(matching_phase_shifts(q2.breaks, q2.heights, k, L) - target)
        return float(np.sum(d * d))

    bounds = [(0.0, 1.0)] + [(base - HEIGHT_BOUND, base + HEIGHT_BOUND)] * (n - 1) + [(0.0, 1.0)] * (n - 1)
    best, best_val = None, math.inf
    restarts = 0
    while used < budget:
        piece, sign = restarts % n, (1.0, -1.0)[(restarts // n) % 2]
        restarts += 1
        p0 = np.concatenate([[rng.uniform(0, 0.5)], base + rng.uniform(-1, 1, n - 1),
                             np.sort(rng.uniform(0.05, 0.95, n - 1))])
        res = minimize(objective, p0, args=(piece, sign), method="Powell", bounds=bounds,
                       options={"maxfev": min(RESTART_EVALS, budget - used), "xtol": 1e-10, "ftol": 1e-14})
        if res.fun < best_val:
            best, best_val = (res.x, piece, sign), float(res.fun)
        if math.sqrt(best_val) <= 0.5 * target_phase_gap:
            break
    best_p, piece, sign = best
    q2 = _build(*_decode(best_p, q1, n, piece, sign, min_potential_gap))
    pair = evaluate_pair(q1, q2, k, L)
    pair.evaluations = used
    pg, vg = pair.phase_gap, pair.potential_gap
    met = pair.target_met = pg <= target_phase_gap and vg >= min_potential_gap
    log.info("ambiguity search: %d restarts, %d evaluations, phase gap %.3g, potential gap %.3g",
             restarts, used, pg, vg)
    if not met and strict:
        raise BudgetExhausted(f"best phase gap {pg:.3g}, potential gap {vg:.3g} after {used} evaluations")
    return pair
