"""Gel'fand-Levitan inversion from the spectral measure of the half-line operator.

The continuous part of dσ = dρ - dρ₀ is handled through
G(k) = π w(k²)/k - 1 = 1/|f(k)|² - 1, which turns the λ-integral for L into
one even Fourier transform H:

    L(x, y) = H(x - y) - H(x + y) + Σ_j c_j φ₀(x, λ_j) φ₀(y, λ_j),
    H(t) = (1/2π) ∫ G(k) e^{ikt} dk.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import FormatError, TailTooLarge
from .forward import RTOL, bound_states, jost_function
from .marchenko import RULE, TriangularKernel, _potential_from_diagonal
from .numerics import (
    SampledFunction,
    UniformGrid,
    derivative,
    oscillatory_fourier,
    quadrature_weights,
    solve_nystrom,
)
from .potential import RadialPotential
from .report import dumps

log = logging.getLogger(__name__)

TAIL_LIMIT = 1e-6
TAPER = 0.7


# ---------------------------------------------------------------------------
# regular solution
# ---------------------------------------------------------------------------

@dataclass
class RegularSolutionEval:
    lam: float
    profile: SampledFunction
    derivative_profile: np.ndarray
    norm_sq: float


def _q_piece(q: RadialPotential, lo: float, hi: float):
    c = q.segment_value(lo, hi)
    if c is not None:
        return lambda x: c
    return lambda x: float(q(x))


def regular_solution(q: RadialPotential, lam: float) -> RegularSolutionEval:
    """φ(x, λ) with φ(0) = 0, φ'(0) = 1 on the grid of ``q``.

    Integrated forward piece by piece up to the support radius; beyond it φ is
    the exact free continuation. For λ < 0 ``norm_sq`` is ∫₀^∞ φ² when φ decays
    (i.e. λ is an eigenvalue), otherwise it is ∫₀^a φ² plus the decaying part.
    """
    lam = float(lam)
    x = q.x
    a = q.support_radius
    phi = np.empty_like(x)
    dphi = np.empty_like(x)
    y = np.array([0.0, 1.0])
    inside = x <= a * (1 + 1e-12)
    pieces = q.segments()
    norm_inside = 0.0
    for lo, hi in pieces:
        qf = _q_piece(q, lo, hi)

        def rhs(t, u, qf=qf):
            return [u[1], (qf(t) - lam) * u[0], u[0] * u[0]]

        sel = inside & (x >= lo) & (x <= hi)
        ts = x[sel]
        t_eval = ts if ts.size and ts[-1] == hi else np.append(ts, hi)
        sol = solve_ivp(rhs, (lo, hi), [y[0], y[1], norm_inside], method="DOP853",
                        t_eval=t_eval, rtol=RTOL, atol=1e-14)
        phi[sel] = sol.y[0, : ts.size]
        dphi[sel] = sol.y[1, : ts.size]
        y = sol.y[:2, -1]
        norm_inside = sol.y[2, -1]
    if not pieces:
        inside = x <= 0.0
        phi[inside], dphi[inside] = 0.0, 1.0
    # free continuation from (a, y)
    out = ~inside
    s = x[out] - a
    u0, u1 = y
    if lam > 0:
        k = math.sqrt(lam)
        phi[out] = u0 * np.cos(k * s) + u1 * np.sin(k * s) / k
        dphi[out] = -u0 * k * np.sin(k * s) + u1 * np.cos(k * s)
        norm = math.inf
    elif lam == 0:
        phi[out] = u0 + u1 * s
        dphi[out] = u1
        norm = math.inf
    else:
        kap = math.sqrt(-lam)
        phi[out] = u0 * np.cosh(kap * s) + u1 * np.sinh(kap * s) / kap
        dphi[out] = u0 * kap * np.sinh(kap * s) + u1 * np.cosh(kap * s)
        # decaying part e^{-κ s} carries the coefficient (u0 - u1/κ)/2; at an
        # eigenvalue the growing part vanishes
        dec = 0.5 * (u0 - u1 / kap)
        norm = norm_inside + dec * dec / (2 * kap)
        grow = 0.5 * (u0 + u1 / kap)
        if abs(grow) > 1e-6 * max(abs(dec), 1e-300):
            log.debug("φ at λ = %g has a growing component %.2e", lam, grow)
    return RegularSolutionEval(lam, SampledFunction(q.grid, phi), dphi, float(norm))


def free_regular(x, lam: float) -> np.ndarray:
    """φ₀(x, λ): sin(x√λ)/√λ, x at λ = 0, sinh(x√-λ)/√-λ for λ < 0."""
    x = np.asarray(x, dtype=float)
    if lam > 0:
        k = math.sqrt(lam)
        return np.sin(k * x) / k
    if lam == 0:
        return x.copy()
    kap = math.sqrt(-lam)
    return np.sinh(kap * x) / kap


# ---------------------------------------------------------------------------
# spectral measure
# ---------------------------------------------------------------------------

@dataclass
class SpectralMeasure:
    lambda_grid: UniformGrid
    w: np.ndarray
    atoms: list = field(default_factory=list)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (self.lambda_grid.count,):
            raise ValueError("density has the wrong length for its grid")
        if self.lambda_grid.start != 0.0:
            raise ValueError("λ grid must start at 0")
        if np.any(self.w < 0):
            raise ValueError("spectral density must be non-negative")
        self.atoms = sorted((float(l), float(c)) for l, c in self.atoms)
        for lam, c in self.atoms:
            if not lam < 0 or not c > 0:
                raise ValueError(f"atom ({lam}, {c}) needs λ < 0 and c > 0")
        if len({l for l, _ in self.atoms}) != len(self.atoms):
            raise ValueError("atoms must be distinct")

    @property
    def lam(self) -> np.ndarray:
        return self.lambda_grid.points

    @property
    def lambda_max(self) -> float:
        return self.lambda_grid.stop

    def reference(self) -> np.ndarray:
        return np.sqrt(self.lam) / np.pi

    def G(self) -> np.ndarray:
        """π w/√λ - 1 (= 1/|f|² - 1) on the λ nodes, λ = 0 by extrapolation."""
        lam = self.lam
        g = np.empty_like(lam)
        # subtract w₀ first so the free measure gives G = 0 exactly
        g[1:] = np.pi * (self.w[1:] - self.reference()[1:]) / np.sqrt(lam[1:])
        # G is smooth in λ; quadratic extrapolation to the origin
        g[0] = 3 * g[1] - 3 * g[2] + g[3] if lam.size > 3 else g[1]
        return g

    def G_on_k(self, k_step: Optional[float] = None) -> SampledFunction:
        """G resampled on a uniform k grid over (0, √Λ_max] by a cubic spline in λ."""
        k_max = math.sqrt(self.lambda_max)
        if k_step is None:
            k_step = min(0.02, k_max / 200)
        grid = UniformGrid.from_range(k_step, k_max, k_step)
        spline = CubicSpline(self.lam, self.G())
        return SampledFunction(grid, spline(grid.points ** 2))

    def to_dict(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "lambda_step": self.lambda_grid.step,
            "w": [float(v) for v in self.w],
            "atoms": [{"lambda": l, "c": c} for l, c in self.atoms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralMeasure":
        try:
            w = np.asarray(d["w"], dtype=float)
            grid = UniformGrid(0.0, float(d["lambda_step"]), w.size)
            atoms = [(float(a["lambda"]), float(a["c"])) for a in d.get("atoms", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed spectral measure: {exc}") from None
        if abs(grid.stop - float(d["lambda_max"])) > 1e-9 * max(1.0, grid.stop):
            raise FormatError("lambda_max does not match lambda_step and len(w)")
        return cls(grid, w, atoms)

    def save(self, path) -> None:
        Path(path).write_text(dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "SpectralMeasure":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
        return cls.from_dict(d)


def spectral_from_potential(q: RadialPotential, lambda_max: float,
                            lambda_step: float = 0.1,
                            kappa_max: Optional[float] = None) -> SpectralMeasure:
    """w(λ) = √λ/(π|f(√λ)|²) on [0, Λ_max] and atoms c_j = 1/∫φ(x, -k_j²)² dx."""
    grid = UniformGrid.from_range(0.0, lambda_max, lambda_step)
    lam = grid.points
    k = np.sqrt(lam[1:])
    f = jost_function(q, k, with_derivative=False)
    w = np.zeros_like(lam)
    w[1:] = k / (np.pi * np.abs(f) ** 2)
    atoms = []
    for kj in bound_states(q, kappa_max):
        ev = regular_solution(q, -kj * kj)
        atoms.append((-kj * kj, 1.0 / ev.norm_sq))
    return SpectralMeasure(grid, w, atoms)


# ---------------------------------------------------------------------------
# L and the GL equation
# ---------------------------------------------------------------------------

def tail_estimate(G: SampledFunction) -> float:
    """Size of the last term of the fitted algebraic tail of G in the L integral.

    The c2/k² part beyond k_max is added in closed form; what is left is of the
    order of the c4/k⁴ term, ∫_K^∞ |c4|/k⁴ dk / π.
    """
    k = G.points
    m = max(8, int(0.5 * k.size))
    kk, gg = k[-m:], np.real(G.values[-m:])
    w = np.sin(np.pi * (np.arange(m) + 0.5) / m) ** 2
    basis = np.stack([1 / kk**2, 1 / kk**4], axis=1) * w[:, None]
    c, *_ = np.linalg.lstsq(basis, gg * w, rcond=None)
    return float(abs(c[1]) / (3 * k[-1] ** 3) / np.pi)


@dataclass
class GLWorkspace:
    """H on a t grid plus the atoms: everything needed for L on a square grid."""

    measure: SpectralMeasure
    h: float
    H: SampledFunction
    tail: float

    def L_matrix(self, n: int) -> np.ndarray:
        """L on nodes 0..n-1 (spacing h)."""
        i = np.arange(n)
        Hv = self.H.values
        L = Hv[np.abs(i[:, None] - i[None, :])] - Hv[i[:, None] + i[None, :]]
        x = self.h * i
        for lam, c in self.measure.atoms:
            p = free_regular(x, lam)
            L = L + c * np.outer(p, p)
        return 0.5 * (L + L.T)


def gl_workspace(measure: SpectralMeasure, x_max: float, h: float,
                 taper: float = 0.0, k_step: Optional[float] = None) -> GLWorkspace:
    G = measure.G_on_k(k_step)
    tail = tail_estimate(G) if np.any(G.values) else 0.0
    if tail > TAIL_LIMIT:
        raise TailTooLarge(f"estimated tail of the dσ integral {tail:.2e} exceeds {TAIL_LIMIT:g}")
    t_grid = UniformGrid.from_range(0.0, 2 * x_max + 2 * h, h)
    if np.any(G.values):
        Hv = np.real(oscillatory_fourier(G, t_grid.points, symmetry="even-real", taper=taper))
    else:
        Hv = np.zeros(t_grid.count)
    return GLWorkspace(measure, h, SampledFunction(t_grid, Hv), tail)


def build_L(measure: SpectralMeasure, x: float, y: float) -> float:
    """L(x, y) = ∫ φ₀(x, λ) φ₀(y, λ) dσ(λ)."""
    G = measure.G_on_k()
    cont = 0.0
    if np.any(G.values):
        tail = tail_estimate(G)
        if tail > TAIL_LIMIT:
            raise TailTooLarge(f"estimated tail of the dσ integral {tail:.2e} exceeds {TAIL_LIMIT:g}")
        H = np.real(oscillatory_fourier(G, [abs(x - y), x + y], symmetry="even-real"))
        cont = H[0] - H[1]
    atoms = sum(c * free_regular(x, lam) * free_regular(y, lam) for lam, c in measure.atoms)
    return float(cont + atoms)


def solve_gl(L: np.ndarray, h: float, rule: str = RULE):
    """Row K(x, ·) on [0, x] from the matrix of L on nodes 0..n (x = n h).

    Solves K(x,y) + ∫₀^x K(x,s) L(s,y) ds + L(x,y) = 0. Returns ``(K, info)``.
    """
    n = L.shape[0]
    weights = quadrature_weights(n, h, rule)
    K, cond, residual = solve_nystrom(L, -L[-1], weights)
    return K, {"condition_number": cond, "residual": residual}


def gl_kernel(ws: GLWorkspace, x_grid: UniformGrid, rule: str = RULE) -> TriangularKernel:
    if abs(x_grid.step - ws.h) > 1e-12 * ws.h or x_grid.start != 0.0:
        raise ValueError("x grid must start at 0 with the workspace step")
    Lfull = ws.L_matrix(x_grid.count)
    rows, conds, res = [], [], []
    for n in range(x_grid.count):
        K, info = solve_gl(Lfull[: n + 1, : n + 1], ws.h, rule)
        rows.append(K)
        conds.append(info["condition_number"])
        res.append(info["residual"])
    w = np.sqrt(quadrature_weights(x_grid.count, ws.h, rule))
    sym = np.eye(x_grid.count) + w[:, None] * Lfull * w[None, :]
    min_eig = float(np.linalg.eigvalsh(sym)[0])
    info = {
        "max_condition_number": float(max(conds)),
        "max_residual": float(max(res)),
        "min_eigenvalue": min_eig,
        "tail_estimate": ws.tail,
    }
    if min_eig < 1e-8:
        log.warning("discretized I + L is not positive (min eigenvalue %.2e)", min_eig)
    return TriangularKernel(x_grid, rows, "gl", info)


def recover_q_gl(kernel: TriangularKernel) -> RadialPotential:
    """q(x) = 2 d/dx K(x, x)."""
    d = kernel.diagonal()
    if d.size < 5:
        raise ValueError("diagonal needs at least 5 nodes")
    return _potential_from_diagonal(kernel.x_grid, 2.0 * derivative(d, kernel.x_grid.step), "gl")


def invert(measure: SpectralMeasure, x_max: float, x_step: float, taper: float = TAPER):
    """Measure to potential; returns ``(q_hat, kernel)``."""
    ws = gl_workspace(measure, x_max, x_step, taper=taper)
    x_grid = UniformGrid.from_range(0.0, x_max, x_step)
    kernel = gl_kernel(ws, x_grid)
    return recover_q_gl(kernel), kernel
