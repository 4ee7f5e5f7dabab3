"""Radial potentials on uniform grids: construction, class checks, moments, CSV I/O."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import FormatError, NonRealError
from .numerics import UniformGrid

log = logging.getLogger(__name__)

GRID_JITTER = 1e-9


@dataclass(frozen=True, eq=False)
class RadialPotential:
    """Real potential q(x) sampled on ``[0, x_max]`` and vanishing beyond ``support_radius``.

    Between nodes q is linearly interpolated. A potential built from pieces
    (``breaks``/``heights``) is evaluated exactly as piecewise constant, and its
    break points are exposed to the ODE integrators via :meth:`segments`.
    """

    grid: UniformGrid
    samples: np.ndarray
    support_radius: float
    label: str = ""
    breaks: Optional[tuple] = None
    heights: Optional[tuple] = None

    def __post_init__(self):
        s = np.asarray(self.samples)
        if np.iscomplexobj(s):
            if np.max(np.abs(s.imag), initial=0.0) > 0:
                raise NonRealError("potential samples must be real")
            s = s.real
        s = np.array(s, dtype=float)
        if s.shape != (self.grid.count,):
            raise ValueError("sample count does not match grid")
        if self.grid.start != 0.0:
            raise ValueError("potential grid must start at x = 0")
        a = float(self.support_radius)
        if a < 0 or a > self.grid.stop * (1 + 1e-12):
            raise ValueError(f"support radius {a} outside [0, x_max = {self.grid.stop}]")
        s[self.grid.points > a * (1 + 1e-12) + 1e-12] = 0.0
        if not np.all(np.isfinite(s)):
            raise ValueError("potential samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "support_radius", a)

    # -- evaluation --------------------------------------------------------
    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    @property
    def x_max(self) -> float:
        return self.grid.stop

    @property
    def is_piecewise(self) -> bool:
        return self.breaks is not None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_piecewise:
            edges = np.asarray(self.breaks)
            idx = np.searchsorted(edges, x, side="left") - 1
            idx = np.clip(idx, 0, len(self.heights) - 1)
            vals = np.asarray(self.heights)[idx]
            return np.where((x >= 0) & (x <= self.support_radius), vals, 0.0)
        inside = x <= self.support_radius * (1 + 1e-12)
        return np.where(inside, np.interp(x, self.x, self.samples), 0.0)

    def segments(self) -> list:
        """Intervals covering ``[0, a]`` on which q is smooth."""
        a = self.support_radius
        if a == 0:
            return []
        if self.is_piecewise:
            e = list(self.breaks)
            return [(e[i], e[i + 1]) for i in range(len(e) - 1) if e[i + 1] > e[i]]
        return [(0.0, a)]

    def segment_value(self, lo: float, hi: float):
        """Constant value on a segment of a piecewise potential, else None."""
        if not self.is_piecewise:
            return None
        return float(self(0.5 * (lo + hi)))

    # -- class checks --------------------------------------------------------
    @property
    def first_moment(self) -> float:
        """∫ x |q(x)| dx, finite for every compactly supported sample set."""
        return float(_abs_moments(self, 1)[1])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.samples)

    def with_label(self, label: str) -> "RadialPotential":
        return RadialPotential(self.grid, self.samples, self.support_radius, label,
                               self.breaks, self.heights)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def _grid(x_max: float, step: float) -> UniformGrid:
    return UniformGrid.from_range(0.0, x_max, step)


def piecewise_constant(breaks: Sequence[float], heights: Sequence[float],
                       x_max: Optional[float] = None, step: float = 0.01,
                       label: str = "") -> RadialPotential:
    """q = heights[i] on (breaks[i], breaks[i+1]], zero beyond breaks[-1].

    ``breaks`` starts at 0; the sample at a break point takes the value of the
    piece to its left (so the last nonzero sample sits at the support radius).
    """
    breaks = tuple(float(b) for b in breaks)
    heights = tuple(float(h) for h in heights)
    if breaks[0] != 0.0 or len(breaks) != len(heights) + 1:
        raise ValueError("breaks must start at 0 and have one more entry than heights")
    if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        raise ValueError("breaks must be strictly increasing")
    a = breaks[-1]
    x_max = a + 1.0 if x_max is None else x_max
    grid = _grid(x_max, step)
    x = grid.points
    idx = np.clip(np.searchsorted(breaks, x, side="left") - 1, 0, len(heights) - 1)
    samples = np.where(x <= a * (1 + 1e-12), np.asarray(heights)[idx], 0.0)
    return RadialPotential(grid, samples, a, label or "piecewise", breaks, heights)


def square_well(q0: float, a: float = 1.0, x_max: Optional[float] = None,
                step: float = 0.01) -> RadialPotential:
    """q = q0 on [0, a]; a barrier for q0 > 0, a well for q0 < 0."""
    return piecewise_constant([0.0, a], [q0], x_max, step, label=f"square q0={q0:g} a={a:g}")


def from_function(func: Callable, a: float, x_max: Optional[float] = None,
                  step: float = 0.01, label: str = "") -> RadialPotential:
    x_max = a + 1.0 if x_max is None else x_max
    grid = _grid(x_max, step)
    x = grid.points
    samples = np.where(x <= a, np.asarray(func(x), dtype=float), 0.0)
    return RadialPotential(grid, samples, a, label or "function")


def from_samples(x: np.ndarray, q: np.ndarray, label: str = "",
                 support_radius: Optional[float] = None) -> RadialPotential:
    x = np.asarray(x, dtype=float)
    q = np.asarray(q)
    grid = _validate_grid(x)
    a = support_radius if support_radius is not None else detect_support(x, q)
    return RadialPotential(grid, q, a, label)


def zero_potential(x_max: float = 2.0, step: float = 0.01) -> RadialPotential:
    grid = _grid(x_max, step)
    return RadialPotential(grid, np.zeros(grid.count), 0.0, "zero")


def detect_support(x: np.ndarray, q: np.ndarray) -> float:
    nz = np.nonzero(np.asarray(q) != 0)[0]
    if nz.size == 0:
        log.warning("potential is identically zero; support radius falls back to x_max")
        return float(x[-1])
    return float(x[nz[-1]])


def _validate_grid(x: np.ndarray) -> UniformGrid:
    if x.size < 2:
        raise FormatError("need at least two grid points")
    if x[0] != 0.0:
        raise FormatError(f"grid must start at x = 0, starts at {x[0]}")
    d = np.diff(x)
    step = float((x[-1] - x[0]) / (x.size - 1))
    if np.any(d <= 0):
        raise FormatError("x must be strictly increasing")
    if np.max(np.abs(d - step)) > GRID_JITTER * step:
        raise FormatError("x grid is not uniform")
    return UniformGrid(0.0, step, x.size)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def load_potential(path) -> RadialPotential:
    """Read a two-column ``x,q`` CSV file with a header line."""
    path = Path(path)
    xs, qs = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "q"]:
            raise FormatError(f"{path}: expected header 'x,q', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                xv = float(row[0])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric x {row[0]!r}") from None
            qv = _parse_real(row[1], path, lineno)
            xs.append(xv)
            qs.append(qv)
    x = np.array(xs)
    q = np.array(qs)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(q))):
        raise FormatError(f"{path}: non-finite entries")
    return from_samples(x, q, label=path.stem)


def _parse_real(text: str, path, lineno: int) -> float:
    t = text.strip()
    try:
        return float(t)
    except ValueError:
        pass
    try:
        z = complex(t.replace(" ", ""))
    except ValueError:
        raise FormatError(f"{path}:{lineno}: non-numeric q {text!r}") from None
    if z.imag != 0:
        raise NonRealError(f"{path}:{lineno}: complex potential value {text!r}")
    return z.real


def save_potential(q: RadialPotential, path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("x,q\n")
        for xv, qv in zip(q.x, q.samples):
            fh.write(f"{xv:.17g},{qv:.17g}\n")


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def _abs_moments(q: RadialPotential, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if q.support_radius == 0:
        return np.zeros(n_max + 1)
    if q.is_piecewise:
        b = np.asarray(q.breaks)
        h = np.abs(np.asarray(q.heights))
        with np.errstate(under="ignore"):
            pw = b[None, :] ** (n[:, None] + 1) / (n[:, None] + 1)
        return (np.diff(pw, axis=1) * h[None, :]).sum(axis=1)
    inside = q.x <= q.support_radius * (1 + 1e-12)
    x = q.x[inside]
    absq = np.abs(q.samples[inside])
    if x.size < 2:
        return np.zeros(n_max + 1)
    with np.errstate(under="ignore"):
        return np.array([simpson(x**k * absq, x=x) for k in n])


@dataclass(frozen=True)
class MomentReport:
    n: int
    Q_n: float
    growth_exponent_b: float
    infinitely_many_resonances: bool = False


def moments(q: RadialPotential, n_max: int) -> list:
    """Q_n = ∫ x^n |q(x)| dx for n = 0..n_max with a fitted growth exponent.

    The exponent b comes from least squares of log Q_n on (n log n, n, 1) over
    the top half of the n-range; ``Q_n = O(n^{bn})`` with b < 1 and q ≢ 0 flags
    infinitely many resonances. Every report carries the same b.
    """
    if n_max < 0 or n_max > 200:
        raise ValueError("n_max must lie in [0, 200]")
    Q = _abs_moments(q, n_max)
    b = math.nan
    if not q.is_zero and n_max >= 4:
        ns = np.arange(n_max // 2, n_max + 1)
        ns = ns[ns >= 1]
        Qs = Q[ns]
        ok = Qs > 0
        if ok.sum() >= 3:
            n_f = ns[ok].astype(float)
            basis = np.stack([n_f * np.log(n_f), n_f, np.ones_like(n_f)], axis=1)
            coef, *_ = np.linalg.lstsq(basis, np.log(Qs[ok]), rcond=None)
            b = float(coef[0])
    flag = (not q.is_zero) and math.isfinite(b) and b < 1
    return [MomentReport(n, float(Q[n]), b, flag) for n in range(n_max + 1)]
