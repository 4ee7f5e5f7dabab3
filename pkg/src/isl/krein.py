"""Krein inversion for data without bound states.

f(k) is rebuilt from S(k) by the exponential Cauchy formula, H(t) is the
Fourier transform of 1/|f|² - 1, and for each x the equation

    Γ(t) + ∫₀^{2x} H(t - u) Γ(u) du = H(t),   0 <= t <= 2x

gives a(x) = 2 Γ(2x), from which q = a² + a'.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchJump, IndexNonzero
from .forward import HalfLineScatteringData
from .marchenko import RULE, TriangularKernel, _potential_from_diagonal
from .numerics import (
    SampledFunction,
    UniformGrid,
    derivative,
    oscillatory_fourier,
    quadrature_weights,
    solve_nystrom,
    winding_number,
)
from .report import write_csv

log = logging.getLogger(__name__)

EPS = 1e-4
TAPER = 0.7
PHASE_TAPER = 0.2
SCALE_B = 3.0
CHUNK = 256


@dataclass
class KreinWorkspace:
    f_plus: SampledFunction
    H: SampledFunction
    conditions: dict = field(default_factory=dict)

    def save_H(self, path) -> None:
        write_csv(path, ("t", "H"), zip(self.H.points.tolist(), self.H.values.tolist()))


def check_index(data: HalfLineScatteringData) -> int:
    """Raise IndexNonzero unless J = 0 and the winding of S is 0."""
    if data.J > 0:
        raise IndexNonzero(
            f"data carry {data.J} bound state(s); Krein's method needs ind S = 0 and no bound states"
        )
    ind = winding_number(data.symmetric_contour())
    if ind != 0:
        raise IndexNonzero(f"index of S is {ind}; Krein's method needs ind S = 0")
    return ind


def unwrapped_phase(data: HalfLineScatteringData) -> np.ndarray:
    """θ(k) with S = e^{iθ}, continued from k_max downward with θ(∞) = 0."""
    theta = np.angle(data.S[::-1])
    wrapped = np.unwrap(theta)[::-1]
    steps = np.abs(np.diff(wrapped))
    if np.any(steps > 0.5 * np.pi):
        raise BranchJump(f"phase of S changes by {steps.max():.2f} between neighbouring k; refine the k grid")
    if abs(wrapped[0]) > 0.5 * np.pi:
        raise BranchJump(f"unwrapped phase at k_min is {wrapped[0]:.3f}, not near 0")
    return wrapped


def _smooth_basis(y: np.ndarray, b: float) -> np.ndarray:
    u = y * y + b * b
    return np.stack([y / u, y / u**2], axis=1)


def _tail_coefficients(k: np.ndarray, theta: np.ndarray, b: float = SCALE_B,
                       fraction: float = 0.5):
    """(c, d) in θ ≈ c y/(y² + b²) + d y/(y² + b²)² over the top of the grid.

    Hann-weighted least squares, so the oscillating part of θ does not leak
    into the smooth coefficients.
    """
    m = max(8, int(fraction * k.size))
    kk, tt = k[-m:], theta[-m:]
    w = np.sin(np.pi * (np.arange(m) + 0.5) / m) ** 2
    coef, *_ = np.linalg.lstsq(_smooth_basis(kk, b) * w[:, None], tt * w, rcond=None)
    return float(coef[0]), float(coef[1])


def _cauchy_exponent(y: np.ndarray, theta: np.ndarray, coefs, z: np.ndarray,
                     b: float = SCALE_B, taper: float = 0.0) -> np.ndarray:
    """-(1/2π) ∫ θ(y)/(y - z) dy for Im z > 0.

    The smooth part θ_s = c y/(y² + b²) + d y/(y² + b²)² is transformed in
    closed form. The remainder θ - θ_s, odd and oscillating at the top of the
    grid, is rolled off by a raised cosine over the top ``taper`` fraction,
    interpolated piecewise linearly, bridged to 0 over two more grid steps
    and integrated exactly piece by piece.
    """
    c, d = coefs
    r = theta - _smooth_basis(y, b) @ np.array([c, d])
    if taper > 0:
        m = max(int(taper * y.size), 2)
        r = r.copy()
        r[-m:] *= 0.5 * (1 + np.cos(np.pi * np.arange(1, m + 1) / m))
    y = np.append(y, y[-1] + 2 * (y[-1] - y[-2]))
    r = np.append(r, 0.0)
    ys = np.concatenate([-y[::-1], [0.0], y])
    ts = np.concatenate([-r[::-1], [0.0], r])
    y0, y1 = ys[:-1], ys[1:]
    slope = np.diff(ts) / np.diff(ys)
    icpt = ts[:-1] - slope * y0
    out = np.empty(z.size, dtype=complex)
    for lo in range(0, z.size, CHUNK):
        zz = z[lo:lo + CHUNK, None]
        logs = np.diff(np.log(ys[None, :] - zz), axis=1)
        seg = slope[None, :] * (y1 - y0)[None, :] + (icpt[None, :] + slope[None, :] * zz) * logs
        out[lo:lo + CHUNK] = seg.sum(axis=1)
    zb = z + 1j * b
    return -out / (2 * np.pi) - 0.5j * c / zb + d / (4 * b * zb**2)


def jost_from_S(data: HalfLineScatteringData, eps: float = EPS,
                taper: float = PHASE_TAPER) -> SampledFunction:
    """f(k) on the data grid from S alone (no bound states, index 0).

    The Cauchy integral is evaluated at k + iε and k + 2iε and the exponent is
    extrapolated linearly to ε = 0. On the axis the imaginary part of the
    exponent tends to -θ(k)/2 (the residue half of the Plemelj limit), so the
    phase is taken from that limit and only |f| from the extrapolation.
    ``taper`` rolls off the oscillating part
    of the phase near k_max; a hard cut leaves an offset in ln|f| of the
    size of that oscillation, which the K² growth of the H kernel turns into
    an error spike at x = 0.
    """
    check_index(data)
    k = data.k
    theta = unwrapped_phase(data)
    coefs = _tail_coefficients(k, theta)
    e1 = _cauchy_exponent(k, theta, coefs, k + 1j * eps, taper=taper)
    e2 = _cauchy_exponent(k, theta, coefs, k + 2j * eps, taper=taper)
    log_mod = np.real(2 * e1 - e2)
    f = np.exp(log_mod - 0.5j * theta)
    return SampledFunction(data.k_grid, f, info={"tail_coefficients": coefs})


def build_H(f: SampledFunction, t_grid: UniformGrid, taper: float = 0.0,
            tail: bool = True) -> SampledFunction:
    """H(t) = (1/2π)∫ e^{-ikt}(1/|f(k)|² - 1) dk, real and even in t.

    ``tail=False`` drops the fitted part beyond k_max (band-limited H).
    """
    mod = np.abs(f.values)
    if np.min(mod) < 1e-8:
        raise ValueError("|f| vanishes on the real axis")
    G = SampledFunction(f.grid, 1.0 / mod**2 - 1.0)
    t = t_grid.points
    if not np.any(G.values):
        return SampledFunction(t_grid, np.zeros(t.size), info={"asymmetry": 0.0})
    plus = oscillatory_fourier(G, t, symmetry="even-real", tail=tail, taper=taper)
    minus = oscillatory_fourier(G, -t, symmetry="even-real", tail=tail, taper=taper)
    asym = float(np.max(np.abs(plus - minus)))
    imag = float(np.max(np.abs(np.imag(plus))))
    H = 0.5 * np.real(plus + minus)
    return SampledFunction(t_grid, H, info={"asymmetry": asym, "imag_residue": imag})


def solve_krein(H: SampledFunction, x: float, rule: str = RULE):
    """Γ_x(t, 0) on the H-grid nodes in [0, x].

    Solves Γ(t) + ∫₀^x H(t - u) Γ(u) du = H(t) with H even. Returns
    ``(Γ, info)``; Γ[-1] is Γ_x(x, 0).
    """
    h = H.grid.step
    if H.grid.start != 0.0:
        raise ValueError("H must be sampled on t >= 0 from 0")
    n = int(round(x / h)) + 1
    if n > H.grid.count:
        raise ValueError(f"H is known up to t = {H.grid.stop}, need {x}")
    j = np.arange(n)
    Hv = H.values
    kern = Hv[np.abs(j[:, None] - j[None, :])]
    weights = quadrature_weights(n, h, rule)
    gamma, cond, residual = solve_nystrom(kern, Hv[:n].copy(), weights)
    return gamma, {"condition_number": cond, "residual": residual}


def krein_kernel(H: SampledFunction, x_grid: UniformGrid, rule: str = RULE) -> TriangularKernel:
    """Row Γ_{2x}(·, 0) on [0, 2x] for each node x (stored on the H grid,
    which shares the x step); the diagonal entry is Γ_{2x}(2x, 0)."""
    h = H.grid.step
    if abs(x_grid.step - h) > 1e-12 * h or x_grid.start != 0.0:
        raise ValueError("x grid must start at 0 with the H grid step")
    rows, conds, res = [], [], []
    for x in x_grid.points:
        gamma, info = solve_krein(H, 2 * x, rule)
        rows.append(gamma)
        conds.append(info["condition_number"])
        res.append(info["residual"])
    info = {"max_condition_number": float(max(conds)), "max_residual": float(max(res))}
    return TriangularKernel(x_grid, rows, "gl", info)


def recover_q_krein(H: SampledFunction, x_grid: UniformGrid, rule: str = RULE):
    """q = a² + a' with a(x) = 2Γ_{2x}(2x, 0); returns ``(q, a)``."""
    if x_grid.count < 5:
        raise ValueError("need at least 5 x nodes")
    kernel = krein_kernel(H, x_grid, rule)
    a = 2.0 * kernel.diagonal()
    q = a * a + derivative(a, x_grid.step)
    pot = _potential_from_diagonal(x_grid, q, "krein")
    return pot, a, kernel


def workspace(data: HalfLineScatteringData, x_max: float, x_step: float,
              taper: float = TAPER) -> KreinWorkspace:
    f = jost_from_S(data)
    t_grid = UniformGrid.from_range(0.0, 2 * x_max + 2 * x_step, x_step)
    H = build_H(f, t_grid, taper=taper)
    S_back = np.conj(f.values) / f.values
    conditions = {
        "symmetry_ok": bool(H.info["asymmetry"] <= 1e-8),
        "index_zero": True,
        "F_norms_ok": bool(np.all(np.isfinite(H.values))),
        "S_reproduction": float(np.max(np.abs(S_back - data.S))),
    }
    return KreinWorkspace(f, H, conditions)


def invert(data: HalfLineScatteringData, x_max: float, x_step: float, taper: float = TAPER):
    """Scattering data to potential; returns ``(q_hat, workspace, a)``."""
    ws = workspace(data, x_max, x_step, taper)
    x_grid = UniformGrid.from_range(0.0, x_max, x_step)
    q, a, _ = recover_q_krein(ws.H, x_grid)
    return q, ws, a
