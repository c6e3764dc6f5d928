"""Single-photon transverse-momentum densities and the two-photon beat envelope.

The envelope is the autocorrelation of the momentum density,

    C(dk) = int dK |phi(K + dk/2)|^2 |phi(K - dk/2)|^2,

which for a Gaussian density of standard deviation ``sigma_k`` is itself a
Gaussian of variance ``2 sigma_k**2``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.interpolate import CubicSpline

from .errors import InvalidParameterError, ParseError, ResolutionError

GAUSSIAN = "gaussian"
TABULATED = "tabulated"

# sigma_x ~ 2 pi / (2.8 k0) for diffraction-limited optics; informational only.
FOURIER_LIMIT_FACTOR = 2.0 * math.pi / 2.8

# Minimum grid points per sigma_k for a tabulated density.
POINTS_PER_SIGMA = 16
# Envelope tables span at least this many sigma_k * sqrt(2) on each side.
ENVELOPE_HALF_SPAN = 8.0
# Envelopes are truncated where C drops below this fraction of C(0).
TRUNCATION = 1e-14
# Tabulated densities must fall to this fraction of their peak at both ends.
TAIL_FRACTION = 1e-6


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True, eq=False)
class MomentumDistribution:
    """Normalised density |phi(k)|^2, either Gaussian or tabulated."""

    kind: str
    sigma_k: float
    grid: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)
    mean: float = 0.0

    def density(self, k):
        k = np.asarray(k)
        if self.kind == GAUSSIAN:
            s2 = self.sigma_k ** 2
            return np.exp(-(k - self.mean) ** 2 / (2.0 * s2)) / np.sqrt(2.0 * np.pi * s2)
        return np.interp(k, self.grid, self.values, left=0.0, right=0.0)

    def variance(self) -> float:
        return self.sigma_k ** 2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == GAUSSIAN:
            return rng.normal(self.mean, self.sigma_k, size)
        return _piecewise_linear_ppf(self.grid, self.values, rng.random(size))


def make_gaussian(sigma_k: float, mean: float = 0.0) -> MomentumDistribution:
    return MomentumDistribution(GAUSSIAN, _positive("sigma_k", sigma_k), mean=float(mean))


def make_tabulated(grid, values) -> MomentumDistribution:
    """Build a tabulated density, normalising it by the trapezoidal rule.

    Densities with visible tails at the grid edges are rejected: their second
    moment is not determined by the table.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or grid.size < 3:
        raise InvalidParameterError("grid and values must be 1-D arrays of equal length >= 3")
    if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
        raise InvalidParameterError("grid and values must be finite")
    if np.any(np.diff(grid) <= 0):
        raise InvalidParameterError("grid must be strictly increasing")
    if np.any(values < 0):
        raise InvalidParameterError("density values must be non-negative")
    peak = values.max()
    if peak <= 0:
        raise InvalidParameterError("density is identically zero")
    if max(values[0], values[-1]) > TAIL_FRACTION * peak:
        raise InvalidParameterError(
            "density does not decay at the grid edges; its second moment is undefined")

    mass = np.trapezoid(values, grid)
    values = values / mass
    mean = float(np.trapezoid(grid * values, grid))
    var = float(np.trapezoid((grid - mean) ** 2 * values, grid))
    if not var > 0:
        raise InvalidParameterError("density has zero variance")
    grid.setflags(write=False)
    values.setflags(write=False)
    return MomentumDistribution(TABULATED, math.sqrt(var), grid, values, mean)


def load_distribution_csv(path) -> MomentumDistribution:
    """Read a two-column ``k,density`` CSV; a non-numeric first row is a header."""
    ks, ps = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2:
                raise ParseError("expected two columns (k, density)", lineno)
            try:
                k, p = float(row[0]), float(row[1])
            except ValueError:
                if not ks and lineno == 1:
                    continue
                raise ParseError(f"non-numeric value in {row!r}", lineno) from None
            ks.append(k)
            ps.append(p)
    if not ks:
        raise ParseError(f"no data rows in {Path(path).name}")
    return make_tabulated(ks, ps)


@dataclass(frozen=True, eq=False)
class BeatEnvelope:
    """Two-photon envelope C(dk), closed-form Gaussian or a numeric table."""

    kind: str
    sigma_k: float
    table_dk: np.ndarray | None = field(default=None, repr=False)
    table_c: np.ndarray | None = field(default=None, repr=False)
    _cdf: np.ndarray | None = field(default=None, repr=False)
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    @property
    def is_gaussian(self) -> bool:
        return self.kind == GAUSSIAN

    def __call__(self, dk):
        dk = np.asarray(dk)
        if self.is_gaussian:
            s2 = self.sigma_k ** 2
            return np.exp(-dk ** 2 / (4.0 * s2)) / np.sqrt(4.0 * np.pi * s2)
        mag = np.abs(dk)
        inside = mag <= self.table_dk[-1]
        return np.where(inside, np.maximum(self._spline(np.minimum(mag, self.table_dk[-1])), 0.0), 0.0)

    def half_width(self) -> float:
        """Distance beyond which C < TRUNCATION * C(0)."""
        if self.is_gaussian:
            return 12.0 * self.sigma_k
        above = np.nonzero(self.table_c >= TRUNCATION * self.table_c[0])[0]
        return float(self.table_dk[min(above[-1] + 1, self.table_dk.size - 1)])

    def second_moment(self) -> float:
        if self.is_gaussian:
            return 2.0 * self.sigma_k ** 2
        dk, c = self.table_dk, self.table_c
        return 2.0 * float(np.trapezoid(dk ** 2 * c, dk))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.is_gaussian:
            return rng.normal(0.0, math.sqrt(2.0) * self.sigma_k, size)
        u = rng.random(size)
        # C is even: draw |dk| from the one-sided table, then a sign.
        mag = _piecewise_linear_ppf(self.table_dk, self.table_c, u, cdf=self._cdf)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign * mag


def envelope(dist: MomentumDistribution) -> BeatEnvelope:
    """Autocorrelation envelope of ``dist``.

    Gaussian inputs get the closed form. Tabulated inputs are resampled onto
    a uniform grid (zero padded so the result spans at least
    +-8*sqrt(2)*sigma_k) and correlated numerically; the table stores the
    non-negative half of the even function.
    """
    if dist.kind == GAUSSIAN:
        return BeatEnvelope(GAUSSIAN, dist.sigma_k)

    grid, values, sigma = dist.grid, dist.values, dist.sigma_k
    spacing = np.diff(grid)
    if sigma / spacing.max() < POINTS_PER_SIGMA:
        raise ResolutionError(
            f"grid spacing {spacing.max():.3g} gives fewer than {POINTS_PER_SIGMA} "
            f"points per sigma_k={sigma:.3g}")

    if np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
        h = float(spacing[0])
        p = np.array(values, dtype=float)
        start = float(grid[0])
    else:
        h = min(float(spacing.min()), sigma / (2 * POINTS_PER_SIGMA))
        n = int(math.ceil((grid[-1] - grid[0]) / h))
        h = (grid[-1] - grid[0]) / n
        start = float(grid[0])
        p = np.interp(start + h * np.arange(n + 1), grid, values)

    need = ENVELOPE_HALF_SPAN * math.sqrt(2.0) * sigma
    pad = max(1, int(math.ceil((need - (p.size - 1) * h) / (2 * h))) + 1)
    p = np.concatenate([np.zeros(pad), p, np.zeros(pad)])
    p /= p.sum() * h

    full = signal.correlate(p, p, mode="full") * h
    full = 0.5 * (full + full[::-1])
    np.maximum(full, 0.0, out=full)
    centre = p.size - 1
    half = full[centre:].copy()
    dk = h * np.arange(half.size)
    # Even function: total mass = 2 * one-sided trapezoid (ends are zero).
    half /= 2.0 * np.trapezoid(half, dk)

    cdf = _piecewise_linear_cdf(dk, half)
    for arr in (dk, half, cdf):
        arr.setflags(write=False)
    # Cubic interpolation on the mirrored table: linear interpolation at
    # 16 points per sigma is only good to ~1e-5.
    spline = CubicSpline(np.concatenate([-dk[:0:-1], dk]), np.concatenate([half[:0:-1], half]))
    return BeatEnvelope(TABULATED, sigma, dk, half, cdf, spline)


def qfi(sigma_k: float) -> float:
    """Quantum Fisher information for the separation, ``2 sigma_k**2``."""
    return 2.0 * _positive("sigma_k", sigma_k) ** 2


def _piecewise_linear_cdf(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    seg = 0.5 * (y[1:] + y[:-1]) * np.diff(x)
    cdf = np.concatenate([[0.0], np.cumsum(seg)])
    return cdf / cdf[-1]


def _piecewise_linear_ppf(x, y, u, cdf=None) -> np.ndarray:
    """Exact inverse CDF of the linear interpolant of ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if cdf is None:
        cdf = _piecewise_linear_cdf(x, y)
    total = np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    y = y / total
    idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, x.size - 2)
    h = x[idx + 1] - x[idx]
    y0 = y[idx]
    slope = (y[idx + 1] - y0) / h
    need = u - cdf[idx]
    # Solve y0 t + slope t^2 / 2 = need for t in [0, h], cancellation-free.
    disc = np.sqrt(np.maximum(y0 ** 2 + 2.0 * slope * need, 0.0))
    denom = y0 + disc
    t = np.where(denom > 0, 2.0 * need / np.where(denom > 0, denom, 1.0), 0.0)
    return x[idx] + np.clip(t, 0.0, h)
