"""Forward scattering for compactly supported potentials.

Half-line problem: Jost solution f(x, k) of -f'' + q f = k² f with
f = e^{ikx} for x ≥ a, Jost function f(k) = f(0, k), S(k) = f(-k)/f(k),
bound states -k_j² with f(i k_j) = 0 and norming constants s_j.
Radial problem: fixed-energy phase shifts δ_ℓ by the variable-phase equation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import gammaln, spherical_jn, spherical_yn

from .errors import (
    CrossCheckFailure,
    DivisionSingularity,
    FormatError,
    MatchingSingularity,
    StepSizeError,
    ZeroJost,
)
from .numerics import SampledFunction, UniformGrid
from .potential import RadialPotential

RTOL = 1e-12
CHUNK = 384


# ---------------------------------------------------------------------------
# Jost solution
# ---------------------------------------------------------------------------

@dataclass
class JostEvaluation:
    k: complex
    f0: complex
    fprime0: complex
    profile: Optional[SampledFunction] = None


def _q_on_segment(q: RadialPotential, lo: float, hi: float):
    const = q.segment_value(lo, hi)
    if const is not None:
        return lambda x: const
    xs, vs = q.x, q.samples
    return lambda x: float(np.interp(x, xs, vs))


def _integrate_jost(q: RadialPotential, ks: np.ndarray, x_eval=None, with_norm=False):
    """Backward integration from x = a to 0 for every k in ``ks`` at once.

    Returns ``(f0, fp0, profile, norm)``; ``profile`` has shape
    (len(x_eval), len(ks)) when requested and ``norm`` is ∫_0^a f(x,k)² dx.
    """
    ks = np.asarray(ks, dtype=complex)
    n = ks.size
    a = q.support_radius
    profile = None
    if x_eval is not None:
        x_eval = np.asarray(x_eval, dtype=float)
        profile = np.exp(1j * np.outer(x_eval, ks))
    segs = [] if q.is_zero else q.segments()
    if not segs:
        return np.ones(n, dtype=complex), 1j * ks, profile, _free_norm(ks, 0.0, a)

    ea = np.exp(1j * ks * a)
    y = np.concatenate([ea, 1j * ks * ea] + ([np.zeros(n, dtype=complex)] if with_norm else []))
    k2 = ks * ks
    scale = np.maximum(np.abs(ea), 1e-300) * np.maximum(1.0, np.abs(ks))
    atol = np.tile(scale * 1e-15, 3 if with_norm else 2)
    for lo, hi in reversed(segs):
        qf = _q_on_segment(q, lo, hi)

        def rhs(x, y, qf=qf):
            out = np.empty_like(y)
            fv = y[:n]
            out[:n] = y[n:2 * n]
            out[n:2 * n] = (qf(x) - k2) * fv
            if with_norm:
                out[2 * n:] = -fv * fv
            return out

        t_eval, sel = None, None
        if x_eval is not None:
            sel = np.nonzero((x_eval >= lo) & (x_eval < hi))[0][::-1]
            t_eval = np.append(x_eval[sel], lo) if sel.size == 0 or x_eval[sel[-1]] != lo \
                else x_eval[sel]
        sol = solve_ivp(rhs, (hi, lo), y, method="DOP853", rtol=RTOL, atol=atol, t_eval=t_eval)
        if sol.status != 0:
            raise StepSizeError(f"Jost integration failed on [{lo}, {hi}]: {sol.message}")
        if sel is not None and sel.size:
            profile[sel] = sol.y[:n, :sel.size].T
        y = sol.y[:, -1]
    norm = y[2 * n:] if with_norm else None
    return y[:n], y[n:2 * n], profile, norm


def _free_norm(ks, lo, hi):
    """∫_lo^hi e^{2ikx} dx."""
    ks = np.asarray(ks, dtype=complex)
    out = np.empty(ks.shape, dtype=complex)
    z = ks == 0
    out[z] = hi - lo
    kk = ks[~z]
    out[~z] = (np.exp(2j * kk * hi) - np.exp(2j * kk * lo)) / (2j * kk)
    return out


def jost_function(q: RadialPotential, ks, with_derivative: bool = True):
    """f(0, k) and f'(0, k) for an array of (complex) wavenumbers."""
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    if np.any(ks == 0):
        raise ValueError("k = 0 is excluded")
    f0 = np.empty(ks.shape, dtype=complex)
    fp0 = np.empty(ks.shape, dtype=complex)
    order = np.argsort(np.abs(ks))
    for start in range(0, ks.size, CHUNK):
        idx = order[start:start + CHUNK]
        f, fp, _, _ = _integrate_jost(q, ks[idx])
        f0[idx], fp0[idx] = f, fp
    if with_derivative:
        return f0, fp0
    return f0


def jost_solution(q: RadialPotential, k: complex, profile: bool = True) -> JostEvaluation:
    """Jost solution at one wavenumber, with its profile on the potential grid."""
    k = complex(k)
    if k == 0:
        raise ValueError("k = 0 is excluded")
    x = q.x if profile else None
    f, fp, prof, _ = _integrate_jost(q, np.array([k]), x_eval=x)
    sampled = SampledFunction(q.grid, prof[:, 0]) if profile else None
    return JostEvaluation(k, complex(f[0]), complex(fp[0]), sampled)


def jost_norm(q: RadialPotential, kappa: float) -> float:
    """∫_0^∞ f(x, iκ)² dx for κ > 0 (f is real there)."""
    k = np.array([1j * kappa])
    _, _, _, norm = _integrate_jost(q, k, with_norm=True)
    a = q.support_radius
    return float(np.real(norm[0]) + math.exp(-2 * kappa * a) / (2 * kappa))


# ---------------------------------------------------------------------------
# Half-line scattering data
# ---------------------------------------------------------------------------

@dataclass
class HalfLineScatteringData:
    k_grid: UniformGrid
    S: np.ndarray
    bound_states: list = field(default_factory=list)
    f0_values: Optional[np.ndarray] = None

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=complex)
        if self.S.shape != (self.k_grid.count,):
            raise ValueError("S has the wrong length for its k grid")
        if self.k_grid.start <= 0:
            raise ValueError("k grid must be strictly positive")
        self.bound_states = [(float(k), float(s)) for k, s in self.bound_states]

    @property
    def J(self) -> int:
        return len(self.bound_states)

    @property
    def k(self) -> np.ndarray:
        return self.k_grid.points

    def unitarity_defect(self) -> float:
        return float(np.max(np.abs(np.abs(self.S) - 1.0)))

    def symmetric_contour(self) -> np.ndarray:
        """S on k ∈ [-k_max, -k_min] ∪ [k_min, k_max] via S(-k) = conj S(k)."""
        return np.concatenate([np.conj(self.S[::-1]), self.S])

    def to_dict(self) -> dict:
        return {
            "k_min": self.k_grid.start,
            "k_step": self.k_grid.step,
            "S_re": [float(v) for v in self.S.real],
            "S_im": [float(v) for v in self.S.imag],
            "bound_states": [{"k": k, "s": s} for k, s in self.bound_states],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HalfLineScatteringData":
        try:
            re = np.asarray(d["S_re"], dtype=float)
            im = np.asarray(d["S_im"], dtype=float)
            grid = UniformGrid(float(d["k_min"]), float(d["k_step"]), len(re))
            bs = [(float(b["k"]), float(b["s"])) for b in d.get("bound_states", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed scattering data: {exc}") from None
        if im.shape != re.shape:
            raise FormatError("S_re and S_im differ in length")
        return cls(grid, re + 1j * im, bs)

    def save(self, path) -> None:
        from .report import dumps
        Path(path).write_text(dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "HalfLineScatteringData":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
        return cls.from_dict(d)


def scattering_matrix(q: RadialPotential, k_grid: UniformGrid) -> HalfLineScatteringData:
    """S(k) = f(-k)/f(k) on a positive k grid, with f(-k) = conj f(k)."""
    k = k_grid.points
    if k[0] <= 0:
        raise ValueError("k grid must be strictly positive")
    f0 = jost_function(q, k, with_derivative=False)
    small = np.abs(f0) < 1e-12
    if np.any(small):
        raise ZeroJost(f"|f(k)| < 1e-12 at k = {k[small][0]:.6g}")
    S = np.conj(f0) / f0
    data = HalfLineScatteringData(k_grid, S, [], f0)
    defect = data.unitarity_defect()
    if defect > 1e-8:
        raise ZeroJost(f"S is not unitary to 1e-8 (defect {defect:.2e})")
    return data


def scattering_data(q: RadialPotential, k_grid: UniformGrid,
                    kappa_max: Optional[float] = None) -> HalfLineScatteringData:
    """S on ``k_grid`` together with all bound states and norming constants."""
    data = scattering_matrix(q, k_grid)
    kjs = bound_states(q, kappa_max)
    data.bound_states = [(kj, norming_constant(q, kj)) for kj in kjs]
    return data


def default_kappa_max(q: RadialPotential) -> float:
    depth = max(0.0, -float(np.min(q.samples, initial=0.0)))
    return math.sqrt(depth) * 1.05 + 0.05


def bound_states(q: RadialPotential, kappa_max: Optional[float] = None,
                 kappa_step: Optional[float] = None) -> list:
    """Zeros k_j > 0 of κ ↦ f(iκ) on (0, kappa_max], largest first."""
    if q.is_zero:
        return []
    kappa_max = default_kappa_max(q) if kappa_max is None else float(kappa_max)
    step = min(0.01, kappa_max / 50) if kappa_step is None else kappa_step
    kap = np.arange(0.5 * step, kappa_max + step, step)
    vals = np.real(jost_function(q, 1j * kap, with_derivative=False))

    def fk(kk):
        return float(np.real(jost_function(q, np.array([1j * kk]), with_derivative=False)[0]))

    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        if vals[i] == 0:
            roots.append(float(kap[i]))
            continue
        roots.append(brentq(fk, kap[i], kap[i + 1], xtol=1e-14, rtol=1e-15))
    return sorted(set(roots), reverse=True)


def norming_constant_pair(q: RadialPotential, kj: float):
    """(formula value, inverse-norm value) of the norming constant at k = i k_j.

    The formula is s = -2 i k_j / (ḟ(i k_j) f'(0, i k_j)) with ḟ = df/dk by a
    central difference along the imaginary axis; the second value is
    1/∫_0^∞ f(x, i k_j)² dx.
    """
    h = 1e-5 * max(1.0, kj)
    kk = np.array([1j * (kj + h), 1j * (kj - h), 1j * kj])
    f0, fp0 = jost_function(q, kk)
    fdot = (f0[0] - f0[1]) / (2j * h)
    s_formula = -2j * kj / (fdot * fp0[2])
    s_norm = 1.0 / jost_norm(q, kj)
    return float(np.real(s_formula)), float(s_norm)


def norming_constant(q: RadialPotential, kj: float, rel_tol: float = 1e-4) -> float:
    s, s_alt = norming_constant_pair(q, kj)
    if not (s > 0 and abs(s - s_alt) <= rel_tol * abs(s)):
        raise CrossCheckFailure(
            f"norming constant at k_j = {kj:.10g}: formula {s:.10g} vs norm {s_alt:.10g}"
        )
    return s


def i_function(q: RadialPotential, k_grid: UniformGrid) -> SampledFunction:
    """I(k) = f'(0, k)/f(0, k)."""
    f0, fp0 = jost_function(q, k_grid.points)
    if np.any(np.abs(f0) < 1e-12):
        raise ZeroJost("f(0, k) vanishes on the grid")
    return SampledFunction(k_grid, fp0 / f0)


def reflection_coefficient(I: SampledFunction, k_grid: Optional[UniformGrid] = None) -> SampledFunction:
    """Full-line reflection coefficient for q = 0 on x < 0, solved from
    ik(1 - r)/(1 + r) = I(k)."""
    k_grid = k_grid or I.grid
    ik = 1j * k_grid.points
    den = ik + I.values
    if np.any(np.abs(den) < 1e-14 * np.maximum(1.0, np.abs(ik))):
        raise DivisionSingularity("I(k) + ik vanishes on the grid")
    return SampledFunction(k_grid, (ik - I.values) / den)


# ---------------------------------------------------------------------------
# Fixed-energy phase shifts
# ---------------------------------------------------------------------------

@dataclass
class PhaseShiftSet:
    k: float
    delta: np.ndarray
    support_radius_estimates: np.ndarray
    branch: np.ndarray
    raw: np.ndarray

    @property
    def L(self) -> int:
        return len(self.delta) - 1

    def extrapolated_radius(self, l_min: int = 10) -> float:
        """Limit of the radius estimates from a fit ln a_ℓ ≈ c0 + c1 ln ℓ/ℓ + c2/ℓ.

        Only shifts above 1e-250 in magnitude are used.
        """
        ell = np.arange(self.L + 1)
        use = (ell >= l_min) & (np.abs(self.delta) > 1e-250) & np.isfinite(self.support_radius_estimates)
        if use.sum() < 4:
            return math.nan
        n = ell[use].astype(float)
        basis = np.stack([np.ones_like(n), np.log(n) / n, 1 / n], axis=1)
        coef, *_ = np.linalg.lstsq(basis, np.log(self.support_radius_estimates[use]), rcond=None)
        return float(np.exp(coef[0]))

    @property
    def amplitudes(self) -> np.ndarray:
        """A_ℓ = 4π e^{iδ_ℓ} sin δ_ℓ."""
        return 4 * np.pi * np.exp(1j * self.delta) * np.sin(self.delta)


def _riccati(ell: np.ndarray, x: float):
    return x * spherical_jn(ell, x), x * spherical_yn(ell, x)


def _log_double_factorial(n: np.ndarray) -> np.ndarray:
    """log n!! for odd n ≥ -1."""
    m = (np.asarray(n) + 1) / 2
    return gammaln(2 * m + 1) - m * math.log(2) - gammaln(m + 1)


def _born_scales(q: RadialPotential, k: float, ell: np.ndarray) -> np.ndarray:
    a = q.support_radius
    r = np.linspace(0.0, a, 2001)[1:]
    jh = r[:, None] * k * spherical_jn(ell[None, :], k * r[:, None])
    qv = q(r)
    val = np.abs(np.trapezoid(qv[:, None] * jh**2, r, axis=0)) / k
    return np.clip(val, 1e-300, 1.0)


def phase_shifts(q: RadialPotential, k: float = 1.0, L: int = 20) -> PhaseShiftSet:
    """δ_ℓ, ℓ = 0..L, from the variable-phase equation

        δ_ℓ'(r) = -(q(r)/k) [ĵ_ℓ(kr) cos δ_ℓ - ŷ_ℓ(kr) sin δ_ℓ]²,  δ_ℓ(0) = 0,

    integrated through the support with every δ_ℓ scaled by its Born size so
    that shifts of order 1e-80 keep full relative precision. Shifts are then
    reduced to (-π/2, π/2]; the removed multiple of π is kept in ``branch``.
    """
    k = float(k)
    if not k > 0:
        raise ValueError("phase shifts need k > 0")
    ell = np.arange(L + 1)
    raw = np.zeros(L + 1)
    if not q.is_zero and q.support_radius > 0:
        a = q.support_radius
        scale = _born_scales(q, k, ell)
        # start where ŷ_L(kr) stays below 1e200
        log_y = _log_double_factorial(2 * L - 1) / math.log(10)
        r0 = max(1e-8 * a, 10 ** ((log_y - 200) / max(L, 1)) / k)
        log_j0 = (2 * ell + 3) * math.log(k * r0) - 2 * _log_double_factorial(2 * ell + 1) \
            - np.log(2 * ell + 3)
        eta = -float(q(r0 * 0.5)) / k**2 * np.exp(log_j0 - np.log(scale))
        for lo, hi in q.segments():
            if hi <= r0:
                continue
            lo = max(lo, r0)
            qf = _q_on_segment(q, lo, hi)

            def rhs(r, y, qf=qf):
                jh, yh = _riccati(ell, k * r)
                d = scale * y
                val = jh * np.cos(d) - yh * np.sin(d)
                return -(qf(r) / (k * scale)) * val * val

            sol = solve_ivp(rhs, (lo, hi), eta, method="DOP853", rtol=1e-11, atol=1e-13)
            if sol.status != 0:
                raise MatchingSingularity(f"phase equation failed on [{lo}, {hi}]: {sol.message}")
            eta = sol.y[:, -1]
        raw = scale * eta
    branch = np.ceil((raw - np.pi / 2) / np.pi)
    delta = raw - np.pi * branch
    with np.errstate(divide="ignore", invalid="ignore"):
        est = 2 / math.e * ell * np.abs(delta) ** (1.0 / (2 * ell)) / k
    est[0] = np.nan
    return PhaseShiftSet(k, delta, est, branch.astype(int), raw)
