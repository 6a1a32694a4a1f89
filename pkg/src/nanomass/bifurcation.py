"""Bistability region of the driven Duffing resonator in the (omega_p, p) plane.

Detunings in this module are reported as omega_p - omega0, the abscissa of
the usual response plots; the steady-state cubic itself uses omega0 - omega_p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NotBistable
from .model import Drive, ResonatorParams
from .steady_state import solve_energy

BISECT_RTOL = 1e-8
NEAR_CUSP_WIDTH = 1e-6


@dataclass(frozen=True)
class CriticalPoint:
    detuning_c: float
    p_c: float
    e_c: float

    def omega_p(self, params: ResonatorParams) -> float:
        return params.omega0 + self.detuning_c


@dataclass(frozen=True)
class FoldBoundary:
    """Two fold curves bounding the bistable region, one entry per drive level."""

    p: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cusp: CriticalPoint

    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, detuning: float, p: float) -> bool:
        """Linear interpolation of the band edges at drive p."""
        if p <= self.cusp.p_c or p > self.p[-1]:
            return False
        ps = np.concatenate([[self.cusp.p_c], self.p])
        lo = np.interp(p, ps, np.concatenate([[self.cusp.detuning_c], self.lower]))
        hi = np.interp(p, ps, np.concatenate([[self.cusp.detuning_c], self.upper]))
        return bool(lo < detuning < hi)


@dataclass(frozen=True)
class RegionMap:
    omega_p: np.ndarray
    p: np.ndarray
    root_count: np.ndarray
    energy_gap: np.ndarray
    boundary: FoldBoundary | None


def bistability_possible(params: ResonatorParams) -> bool:
    return abs(params.kerr) > math.sqrt(3.0) * params.gamma3


def critical_point(params: ResonatorParams) -> CriticalPoint:
    """Cusp of the bistable region (onset of bistability)."""
    if not bistability_possible(params):
        raise NotBistable(
            f"|K| = {abs(params.kerr):.6g} does not exceed sqrt(3)*gamma3 = "
            f"{math.sqrt(3.0) * params.gamma3:.6g}"
        )
    g, g3, k = params.gamma, params.gamma3, params.kerr
    ak = abs(k)
    s3 = math.sqrt(3.0)
    detuning = g * math.copysign(1.0, k) * (4.0 * g3 * ak + s3 * (k * k + g3 * g3)) / (k * k - 3.0 * g3 * g3)
    p_c = 8.0 / (3.0 * s3) * g**3 * (k * k + g3 * g3) / (ak - s3 * g3) ** 3
    e_c = 2.0 * g / (s3 * (ak - s3 * g3))
    return CriticalPoint(detuning, p_c, e_c)


def discriminant(params: ResonatorParams, detuning: float, p: float) -> float:
    """Sign-faithful discriminant of the energy cubic at omega_p - omega0 = detuning.

    Positive inside the bistable region (three distinct real roots).
    """
    g, g3, k = params.gamma, params.gamma3, params.kerr
    d0 = -detuning
    a = g3 * g3 + k * k
    b = 2.0 * (g * g3 + d0 * k)
    c = g * g + d0 * d0
    # Same rescaling as the root solver: monic, unit linear coefficient.
    s = math.sqrt(c / a)
    bb = b * s / c
    dd = -p / (c * s)
    return 18.0 * bb * dd - 4.0 * bb**3 * dd + bb * bb - 4.0 - 27.0 * dd * dd


def count_roots(params: ResonatorParams, detuning: float, p: float) -> int:
    disc = discriminant(params, detuning, p)
    return 3 if disc > 0 else (1 if disc < 0 else 2)


def _fold_point(params: ResonatorParams, energy: float, sign: float) -> tuple[float, float]:
    """(omega_p - omega0, p) of the fold reached at mode energy E.

    On a fold dp/dE = 0 at fixed detuning, a quadratic in y = omega0 - omega_p + K E.
    """
    g, g3, k = params.gamma, params.gamma3, params.kerr
    lin = g + g3 * energy
    disc = (energy * k) ** 2 - lin * (g + 3.0 * g3 * energy)
    y = -energy * k + sign * math.sqrt(max(disc, 0.0))
    d0 = y - k * energy
    return -d0, (lin * lin + y * y) * energy


def _fold_energy_min(params: ResonatorParams) -> float:
    g, g3, k = params.gamma, params.gamma3, params.kerr
    return g * (2.0 * g3 + math.sqrt(k * k + g3 * g3)) / (k * k - 3.0 * g3 * g3)


def _solve_on_family(params, p, sign, e_lo, e_hi_start, increasing):
    def f(e):
        return _fold_point(params, e, sign)[1] - p

    if increasing:
        e_hi = e_hi_start
        while f(e_hi) < 0:
            e_hi *= 2.0
        return brentq(f, e_lo, e_hi, xtol=1e-15 * e_hi, rtol=1e-15, maxiter=500)
    return brentq(f, e_lo, e_hi_start, xtol=1e-15 * e_hi_start, rtol=1e-15, maxiter=500)


def fold_detunings_parametric(params: ResonatorParams, p: float) -> tuple[float, float]:
    """Both fold detunings at drive p from the energy-parameterized fold condition."""
    cp = critical_point(params)
    if p <= cp.p_c:
        raise ValueError("no fold below the critical drive")
    sgn = math.copysign(1.0, params.kerr)
    e_min = _fold_energy_min(params)
    # The cusp lies on the small-|y| family; the other family joins it at e_min.
    e_high = _solve_on_family(params, p, sgn, cp.e_c, 2.0 * cp.e_c, True)
    p_join = _fold_point(params, e_min, sgn)[1]
    if p <= p_join:
        e_low = _solve_on_family(params, p, sgn, e_min, cp.e_c, False)
        low = _fold_point(params, e_low, sgn)[0]
    else:
        e_low = _solve_on_family(params, p, -sgn, e_min, 2.0 * e_min, True)
        low = _fold_point(params, e_low, -sgn)[0]
    high = _fold_point(params, e_high, sgn)[0]
    return tuple(sorted((low, high)))


def _bisect_edge(params, p, inside, outside):
    scale = max(abs(inside), abs(outside), params.omega0 * 1e-12)
    while abs(outside - inside) > BISECT_RTOL * scale:
        mid = 0.5 * (inside + outside)
        if count_roots(params, mid, p) == 3:
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def _refine_edge(params, p, estimate, towards_inside):
    """Bracket the root-count transition around a parametric estimate and bisect."""
    step = max(abs(estimate), params.gamma) * 1e-7
    for _ in range(60):
        inside = estimate + towards_inside * step
        outside = estimate - towards_inside * step
        if count_roots(params, inside, p) == 3 and count_roots(params, outside, p) != 3:
            return _bisect_edge(params, p, inside, outside)
        step *= 2.0
    return estimate


def trace_boundary(params: ResonatorParams, p_max: float, resolution: int = 100) -> FoldBoundary:
    """Fold curves for drive levels in (p_c, p_max]."""
    cp = critical_point(params)
    if p_max <= cp.p_c:
        raise ValueError(f"p_max={p_max!r} must exceed p_c={cp.p_c!r}")
    levels = cp.p_c + (p_max - cp.p_c) * np.arange(1, resolution + 1) / resolution
    lower = np.empty(resolution)
    upper = np.empty(resolution)
    for i, p in enumerate(levels):
        lo, hi = fold_detunings_parametric(params, p)
        if hi - lo > NEAR_CUSP_WIDTH * params.omega0:
            lo = _refine_edge(params, p, lo, +1.0)
            hi = _refine_edge(params, p, hi, -1.0)
        lower[i], upper[i] = lo, hi
    return FoldBoundary(levels, lower, upper, cp)


def region_map(
    params: ResonatorParams, omega_p: np.ndarray, p: np.ndarray, boundary_resolution: int = 200
) -> RegionMap:
    """Root count and |C3|^2 - |C1|^2 on a (p, omega_p) grid."""
    omega_p = np.asarray(omega_p, dtype=float)
    p = np.asarray(p, dtype=float)
    counts = np.zeros((p.size, omega_p.size), dtype=int)
    gap = np.full((p.size, omega_p.size), np.nan)
    for i, pi in enumerate(p):
        for j, wj in enumerate(omega_p):
            branches = solve_energy(params, Drive(wj, pi))
            counts[i, j] = len(branches)
            if len(branches) == 3:
                gap[i, j] = branches[2].energy - branches[0].energy
    boundary = None
    if bistability_possible(params) and p.size and p.max() > critical_point(params).p_c:
        boundary = trace_boundary(params, float(p.max()), boundary_resolution)
    return RegionMap(omega_p, p, counts, gap, boundary)
