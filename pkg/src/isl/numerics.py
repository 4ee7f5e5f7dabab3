"""Grids, oscillatory Fourier quadrature, Nyström solver and complex root search.

Nothing in here knows about scattering; the other modules build on these
primitives so that the three inversion methods share one discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dgecon, zgecon
from scipy.special import sici

from .errors import (
    BoundaryZero,
    CountMismatch,
    SingularSystem,
    TailTooLarge,
    UnderResolvedContour,
)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class UniformGrid:
    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.count}")

    @classmethod
    def from_range(cls, start: float, stop: float, step: float) -> "UniformGrid":
        """Grid from ``start`` with spacing ``step`` whose last node is the
        largest node not exceeding ``stop`` (up to rounding)."""
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return cls(float(start), float(step), count)

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    def trapezoid_weights(self) -> np.ndarray:
        return quadrature_weights(self.count, self.step, "trapezoid")


_GREGORY_END = np.array([3 / 8, 7 / 6, 23 / 24])


def quadrature_weights(n: int, h: float, rule: str = "trapezoid") -> np.ndarray:
    """Weights on ``n`` equispaced nodes.

    ``"gregory"`` is the trapezoid rule with third-order end corrections
    (weights 3/8, 7/6, 23/24, 1, ..., 1, 23/24, 7/6, 3/8), exact for cubics; it
    falls back to the trapezoid rule below 6 nodes.
    """
    if n == 1:
        return np.zeros(1)
    w = np.full(n, float(h))
    if rule == "gregory" and n >= 6:
        w[:3] = h * _GREGORY_END
        w[-3:] = h * _GREGORY_END[::-1]
    elif rule in ("trapezoid", "gregory"):
        w[0] = w[-1] = 0.5 * h
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return w


def derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative (one-sided at both ends)."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 5:
        return np.gradient(v, h)
    d = np.empty(n)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
    return d


@dataclass
class SampledFunction:
    grid: UniformGrid
    values: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.count,):
            raise ValueError(
                f"values have shape {self.values.shape}, grid has {self.grid.count} points"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sampled values must be finite")

    @property
    def points(self) -> np.ndarray:
        return self.grid.points


# ---------------------------------------------------------------------------
# Second-kind Fredholm equations
# ---------------------------------------------------------------------------

def condition_number(matrix: np.ndarray, lu=None) -> float:
    """1-norm condition number estimate from an LU factorization (LAPACK gecon)."""
    if lu is None:
        lu = lu_factor(matrix)
    anorm = np.abs(matrix).sum(axis=0).max()
    gecon = zgecon if np.iscomplexobj(lu[0]) else dgecon
    rcond, info = gecon(lu[0], anorm, norm="1")
    if info != 0 or rcond == 0.0:
        return math.inf
    return 1.0 / rcond


def solve_nystrom(kernel_matrix: np.ndarray, rhs: np.ndarray, weights: np.ndarray):
    """Solve ``g + K W g = rhs`` for a precomputed kernel matrix.

    Returns ``(g, cond, residual)`` where ``residual`` is the relative max-norm
    residual recomputed from the assembled system.
    """
    n = rhs.shape[0]
    system = np.eye(n, dtype=np.result_type(kernel_matrix, rhs, float))
    system += kernel_matrix * weights[None, :]
    lu = lu_factor(system)
    cond = condition_number(system, lu)
    if not cond <= COND_LIMIT:
        raise SingularSystem(f"discretized I + K is singular (condition number {cond:.3e})")
    g = lu_solve(lu, rhs)
    scale = max(np.max(np.abs(rhs)), np.max(np.abs(g)), 1e-300)
    residual = float(np.max(np.abs(system @ g - rhs)) / scale) if n else 0.0
    return g, cond, residual


def solve_second_kind(
    kernel: Union[Callable, np.ndarray],
    rhs: SampledFunction,
    grid: Optional[UniformGrid] = None,
    rule: str = "trapezoid",
) -> SampledFunction:
    """Nyström solution of ``g(t) + ∫ kernel(t, s) g(s) ds = rhs(t)``.

    Trapezoidal weights by default; ``rule="gregory"`` adds end corrections.

    ``kernel`` is either a vectorized callable ``kernel(t, s)`` or the matrix of
    kernel values on ``grid × grid``. The returned function carries the
    condition number and recomputed residual in ``info``.
    """
    grid = grid or rhs.grid
    if isinstance(kernel, np.ndarray):
        kmat = kernel
    else:
        t = grid.points
        kmat = np.asarray(kernel(t[:, None], t[None, :]))
        kmat = np.broadcast_to(kmat, (grid.count, grid.count))
    weights = quadrature_weights(grid.count, grid.step, rule)
    g, cond, residual = solve_nystrom(kmat, rhs.values, weights)
    return SampledFunction(grid, g, info={"condition_number": cond, "residual": residual})


# ---------------------------------------------------------------------------
# Filon-type Fourier quadrature
# ---------------------------------------------------------------------------

_SERIES_THETA = 0.05


def _quadratic_moments(theta: np.ndarray):
    """Moments ∫_{-1}^{1} s^m e^{iθs} ds, m = 0, 1, 2."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < _SERIES_THETA
    t = np.where(small, 1.0, theta)
    s, c = np.sin(t), np.cos(t)
    m0 = 2 * s / t
    m1 = 2j * (s - t * c) / t**2
    m2 = 2 * ((t**2 - 2) * s + 2 * t * c) / t**3
    if np.any(small):
        z = theta[small]
        z2 = z * z
        m0[small] = 2 * (1 - z2 / 6 + z2**2 / 120 - z2**3 / 5040)
        m1[small] = 2j * z * (1 / 3 - z2 / 30 + z2**2 / 840 - z2**3 / 45360)
        m2[small] = 2 * (1 / 3 - z2 / 10 + z2**2 / 168 - z2**3 / 6480)
    return m0, m1, m2


def _linear_moments(theta: np.ndarray):
    """Moments ∫_0^1 s^m e^{iθs} ds, m = 0, 1."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < _SERIES_THETA
    t = np.where(small, 1.0, theta)
    e = np.exp(1j * t)
    p0 = (e - 1) / (1j * t)
    p1 = e / (1j * t) + (e - 1) / t**2
    if np.any(small):
        z = 1j * theta[small]
        p0s = np.zeros_like(z)
        p1s = np.zeros_like(z)
        term = np.ones_like(z)
        for n in range(9):
            if n:
                term = term * z / n
            p0s += term / (n + 1)
            p1s += term / (n + 2)
        p0[small] = p0s
        p1[small] = p1s
    return p0, p1


def filon_integral(k0: float, h: float, g: np.ndarray, x: np.ndarray) -> np.ndarray:
    """∫_{k0}^{k0+(n-1)h} g(k) e^{ikx} dk for samples ``g`` on a uniform grid.

    Piecewise-quadratic interpolation of ``g`` integrated exactly against the
    exponential; an odd leftover interval is handled with the linear rule.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.asarray(g)
    n = g.shape[0]
    out = np.zeros(x.shape, dtype=complex)
    npanel = (n - 1) // 2
    if npanel:
        m0, m1, m2 = _quadratic_moments(x * h)
        w0, w1, w2 = (m2 - m1) / 2, m0 - m2, (m2 + m1) / 2
        centers = k0 + h * (2 * np.arange(npanel) + 1)
        phase = np.exp(1j * np.outer(x, centers))
        out += h * (
            w0 * (phase @ g[0:2 * npanel:2])
            + w1 * (phase @ g[1:2 * npanel:2])
            + w2 * (phase @ g[2:2 * npanel + 1:2])
        )
    if (n - 1) % 2:
        ka = k0 + h * (n - 2)
        out += linear_panel(ka, h, g[-2], g[-1], x)
    return out


def linear_panel(ka: float, h: float, ga, gb, x: np.ndarray) -> np.ndarray:
    p0, p1 = _linear_moments(x * h)
    return h * np.exp(1j * x * ka) * (ga * (p0 - p1) + gb * p1)


def _tail_integrals(K: float, x: np.ndarray):
    """∫_K^∞ e^{ikx} k^{-n} dk for n = 1, 2, 3.

    At x = 0 the first one is taken as the x → 0+ limit of its imaginary part
    (its real part diverges logarithmically and is returned as 0). Higher
    powers follow from T_{n+1} = e^{iKx}/(n K^n) + (ix/n) T_n.
    """
    ax = np.abs(x)
    pos = ax > 0
    si, ci = sici(K * np.where(pos, ax, 1.0))
    t1 = np.where(pos, -ci + 1j * (np.pi / 2 - si), 1j * np.pi / 2)
    e = np.exp(1j * K * ax)
    t2 = e / K + 1j * ax * np.where(pos, t1, 0.0)
    t3 = e / (2 * K**2) + 0.5j * ax * t2
    neg = x < 0
    return tuple(np.where(neg, np.conj(t), t) for t in (t1, t2, t3))


def fit_tail(k: np.ndarray, g: np.ndarray, symmetry: str, fraction: float = 0.5):
    """Least-squares fit of the algebraic tail of ``g`` over the top of its grid.

    hermitian:  Re g ≈ a2/k² + a4/k⁴ and Im g ≈ b1/k + b3/k³ (the parities
    forced by g(-k) = conj g(k)); even-real:  g ≈ c2/k² + c4/k⁴.
    Returns ``(c1, c2, c3)``, the coefficients of 1/k, 1/k², 1/k³.
    """
    m = max(8, int(fraction * len(k)))
    kk, gg = k[-m:], g[-m:]
    # Hann weights keep oscillating terms such as e^{2ika}/k² from leaking
    # into the algebraic coefficients
    w = np.sin(np.pi * (np.arange(m) + 0.5) / m) ** 2
    even = np.stack([1 / kk**2, 1 / kk**4], axis=1) * w[:, None]
    a, *_ = np.linalg.lstsq(even, np.real(gg) * w, rcond=None)
    if symmetry == "hermitian":
        odd = np.stack([1 / kk, 1 / kk**3], axis=1) * w[:, None]
        b, *_ = np.linalg.lstsq(odd, np.imag(gg) * w, rcond=None)
        return 1j * float(b[0]), complex(a[0]), 1j * float(b[1])
    return 0.0, float(a[0]), 0.0


def oscillatory_fourier(
    g: SampledFunction,
    x: Union[float, Sequence[float], np.ndarray],
    symmetry: str = "hermitian",
    tail: bool = True,
    taper: float = 0.0,
):
    """(1/2π) ∫_{-∞}^{∞} g(k) e^{ikx} dk from samples of g on k ≥ 0.

    ``symmetry`` says how g continues to k < 0: ``"hermitian"`` means
    g(-k) = conj(g(k)), ``"even-real"`` means g real and even. The part on the
    sampled range is integrated by the Filon rule; the part beyond k_max is
    added in closed form from a fitted algebraic tail. A grid starting above
    k = 0 is closed by extrapolating g to the origin.

    ``taper > 0`` rolls the part of g not explained by the algebraic tail off
    to zero with a raised cosine over that top fraction of the k range. This
    removes the Gibbs ringing that a hard cut of oscillating terms would leave.

    Returns a complex scalar for scalar ``x`` and an array otherwise.
    """
    if symmetry not in ("hermitian", "even-real"):
        raise ValueError(f"unknown symmetry {symmetry!r}")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    k = g.grid.points
    vals = np.asarray(g.values)
    if symmetry == "even-real":
        if np.max(np.abs(np.imag(vals)), initial=0.0) > 1e-12 * max(np.max(np.abs(vals)), 1e-300):
            raise ValueError("even-real symmetry requires real samples")
        vals = np.real(vals)
    if k[0] < 0:
        raise ValueError("oscillatory_fourier expects samples on k >= 0")

    peak = np.max(np.abs(vals))
    g_end = abs(vals[-1])
    if peak > 0 and g_end > 0.1 * peak:
        raise TailTooLarge(
            f"|g(k_max)| = {g_end:.3e} is {g_end / peak:.1%} of max|g|; extend k_max"
        )

    coefs = fit_tail(k, vals, symmetry) if tail and peak > 0 else (0.0, 0.0, 0.0)
    if taper > 0 and tail and peak > 0:
        m = max(int(taper * k.size), 2)
        alg = sum(c / k[-m:] ** (p + 1) for p, c in enumerate(coefs))
        roll = 0.5 * (1 + np.cos(np.pi * np.arange(1, m + 1) / m))
        vals = vals.copy() if np.iscomplexobj(vals) else vals.astype(complex if symmetry == "hermitian" else float)
        vals[-m:] = alg + roll * (vals[-m:] - alg)
    half = filon_integral(k[0], g.grid.step, vals, xs)
    if k[0] > 0:
        # quadratic-in-k extrapolation to the origin; odd part vanishes there
        k1, k2 = k[0], k[1]
        g0 = np.real((k2**2 * vals[0] - k1**2 * vals[1]) / (k2**2 - k1**2))
        half += linear_panel(0.0, k1, g0, vals[0], xs)

    total = (half + np.conj(half)) / (2 * np.pi)
    tail_value = np.zeros_like(total)
    if tail and peak > 0:
        c1, c2, c3 = coefs
        t1, t2, t3 = _tail_integrals(k[-1], xs)
        tail_half = c1 * t1 + c2 * t2 + c3 * t3
        tail_value = (tail_half + np.conj(tail_half)) / (2 * np.pi)
        total = total + tail_value
    if scalar:
        return complex(total[0])
    return total


# ---------------------------------------------------------------------------
# Winding numbers and zeros of analytic functions
# ---------------------------------------------------------------------------

def winding_number(samples: np.ndarray, max_jump: float = 0.5 * np.pi) -> int:
    """Number of times the closed curve through ``samples`` winds around 0.

    The last sample is joined back to the first. Raises
    :class:`UnderResolvedContour` when consecutive samples differ in argument
    by more than ``max_jump``.
    """
    z = np.asarray(samples, dtype=complex)
    if np.any(z == 0):
        raise UnderResolvedContour("contour passes through zero")
    closed = np.append(z, z[0])
    dphi = np.angle(closed[1:] / closed[:-1])
    worst = np.max(np.abs(dphi))
    if worst > max_jump:
        raise UnderResolvedContour(f"phase jump {worst:.3f} rad exceeds {max_jump:.3f}")
    return int(round(dphi.sum() / (2 * np.pi)))


@dataclass(frozen=True)
class ComplexBox:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ValueError(f"degenerate box {self}")

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (
            self.re_min - margin <= z.real <= self.re_max + margin
            and self.im_min - margin <= z.imag <= self.im_max + margin
        )

    def boundary(self, n_side: int) -> np.ndarray:
        """Counter-clockwise boundary nodes, first corner not repeated."""
        t = np.linspace(0.0, 1.0, n_side, endpoint=False)
        a, b, c, d = self.re_min, self.re_max, self.im_min, self.im_max
        return np.concatenate([
            a + (b - a) * t + 1j * c,
            b + 1j * (c + (d - c) * t),
            b - (b - a) * t + 1j * d,
            a + 1j * (d - (d - c) * t),
        ])

    def split(self, fraction: float = 0.5):
        if (self.re_max - self.re_min) >= (self.im_max - self.im_min):
            m = self.re_min + fraction * (self.re_max - self.re_min)
            return (ComplexBox(self.re_min, m, self.im_min, self.im_max),
                    ComplexBox(m, self.re_max, self.im_min, self.im_max))
        m = self.im_min + fraction * (self.im_max - self.im_min)
        return (ComplexBox(self.re_min, self.re_max, self.im_min, m),
                ComplexBox(self.re_min, self.re_max, m, self.im_max))


@dataclass
class _Contour:
    z: np.ndarray
    fz: np.ndarray
    count: int


def _trace_contour(f, box: ComplexBox, tol: float, n_side: int = 48,
                   max_rounds: int = 14) -> _Contour:
    z = box.boundary(n_side)
    fz = np.asarray(f(z), dtype=complex)
    for _ in range(max_rounds):
        if np.min(np.abs(fz)) < tol:
            raise BoundaryZero(f"|f| < {tol:g} on the boundary of {box}")
        zc = np.append(z, z[0])
        fc = np.append(fz, fz[0])
        dphi = np.abs(np.angle(fc[1:] / fc[:-1]))
        bad = np.nonzero(dphi > np.pi / 6)[0]
        if bad.size == 0:
            break
        mids = 0.5 * (zc[bad] + zc[bad + 1])
        fm = np.asarray(f(mids), dtype=complex)
        z = np.insert(z, bad + 1, mids)
        fz = np.insert(fz, bad + 1, fm)
    else:
        raise UnderResolvedContour(f"argument of f not resolved on boundary of {box}")
    count = winding_number(fz, max_jump=np.pi / 2)
    return _Contour(z, fz, count)


def argument_principle_count(f, box: ComplexBox, tol: float = 1e-10) -> int:
    """Number of zeros of the analytic function ``f`` inside ``box``."""
    return _trace_contour(f, box, tol).count


def _centroid(contour: _Contour) -> complex:
    """(1/2πi) ∮ z d(log f): the zero location when the box holds exactly one."""
    zc = np.append(contour.z, contour.z[0])
    fc = np.append(contour.fz, contour.fz[0])
    dlog = np.log(np.abs(fc[1:] / fc[:-1])) + 1j * np.angle(fc[1:] / fc[:-1])
    zm = 0.5 * (zc[1:] + zc[:-1])
    return complex(np.sum(zm * dlog) / (2j * np.pi))


def newton_refine(f, z0: complex, tol: float, max_iter: int = 60) -> complex:
    """Damped Newton iteration with central-difference derivatives."""
    z = complex(z0)
    fz = complex(np.asarray(f(np.array([z])))[0])
    for _ in range(max_iter):
        if abs(fz) <= tol:
            return z
        h = 1e-6 * (1 + abs(z))
        fp, fm = np.asarray(f(np.array([z + h, z - h])), dtype=complex)
        deriv = (fp - fm) / (2 * h)
        if deriv == 0:
            break
        step = fz / deriv
        lam = 1.0
        while True:
            znew = z - lam * step
            fnew = complex(np.asarray(f(np.array([znew])))[0])
            if abs(fnew) < abs(fz) or lam < 1e-4:
                break
            lam *= 0.5
        z, fz = znew, fnew
    if abs(fz) <= tol:
        return z
    raise CountMismatch(f"Newton did not reach |f| <= {tol:g} from {z0} (|f| = {abs(fz):.3e})")


def find_zeros_in_box(f, box: ComplexBox, tol: float = 1e-10, max_depth: int = 12) -> list:
    """All zeros of the analytic function ``f`` inside ``box``.

    ``f`` must accept and return complex arrays. Boxes are bisected until each
    holds at most one zero by the argument principle; each zero is then
    polished by damped Newton until ``|f| <= tol``.
    """
    top = _trace_contour(f, box, tol)
    zeros = _search(f, box, top, tol, max_depth)
    if len(zeros) != top.count:
        raise CountMismatch(f"argument principle counts {top.count} zeros, refined {len(zeros)}")
    return sorted(zeros, key=lambda z: (z.real, z.imag))


def _split_traced(f, box: ComplexBox, tol: float):
    for frac in (0.5, 0.4637, 0.5391, 0.4112, 0.5873):
        halves = box.split(frac)
        try:
            return [(b, _trace_contour(f, b, tol)) for b in halves]
        except BoundaryZero:
            continue
    raise BoundaryZero(f"could not split {box} away from zeros")


def _search(f, box: ComplexBox, contour: _Contour, tol: float, depth: int) -> list:
    n = contour.count
    if n == 0:
        return []
    if n < 0:
        raise CountMismatch(f"negative argument-principle count in {box}: f has poles?")
    if n == 1:
        z = newton_refine(f, _centroid(contour), tol)
        margin = 1e-8 * (1 + abs(z))
        if not box.contains(z, margin):
            raise CountMismatch(f"Newton left box {box}: converged to {z}")
        return [z]
    if depth == 0:
        raise CountMismatch(f"{n} zeros could not be separated in {box}")
    out = []
    parts = _split_traced(f, box, tol)
    if sum(c.count for _, c in parts) != n:
        raise CountMismatch(f"sub-box counts do not add up to {n} in {box}")
    for sub, c in parts:
        out.extend(_search(f, sub, c, tol, depth - 1))
    return out
