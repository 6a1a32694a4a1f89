"""Linear response around a steady branch: eigenvalues, propagator, homodyne spectra.

Spectral densities use the two-sided angular-frequency convention in which
(1/2pi) * integral P(omega) d omega is the stationary variance of the
homodyne output. The bath enters through coth(hbar omega0 / 2 k_B T) for
every offset frequency omega, since omega is measured from the pump and the
noise is white on that scale.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SlowingDownDivergence, UnstableBranch
from .model import ResonatorParams, coth_factor
from .steady_state import Linearization

CONFLUENT_RTOL = 1e-8


@dataclass(frozen=True)
class SpectrumResult:
    omega: np.ndarray
    values: np.ndarray
    phi_lo: float
    zero_freq: float
    integral: float
    stderr: np.ndarray | None = None


def _require_stable(lin: Linearization) -> None:
    if lin.zeta >= 1.0 or not lin.is_stable:
        raise UnstableBranch(f"operating point is not a stable branch (zeta={lin.zeta:.6g})")


def eigenvalues(lin: Linearization) -> tuple[complex, complex]:
    """Roots of the homogeneous fluctuation equation.

    lambda_{0,1} = W' +/- sqrt(|V|^2 - W''^2), so that lambda0 + lambda1 = 2W'
    and lambda0 * lambda1 = |W|^2 - |V|^2.
    """
    root = cmath.sqrt(abs(lin.v) ** 2 - lin.w.imag**2)
    return lin.w.real + root, lin.w.real - root


def ring_down_time(lin: Linearization) -> float:
    """t_RD = (lambda0 lambda1)^(-1/2) = 1 / (|W| sqrt(1 - zeta^2))."""
    if lin.zeta >= 1.0:
        raise SlowingDownDivergence(f"zeta = {lin.zeta:.12g} >= 1, ring-down time diverges")
    return 1.0 / (abs(lin.w) * math.sqrt(1.0 - lin.zeta**2))


def propagator(t, lin: Linearization):
    """Retarded Green function of d^2/dt^2 + (lambda0 + lambda1) d/dt + lambda0 lambda1.

    u(t) (exp(-lambda0 t) - exp(-lambda1 t)) / (lambda1 - lambda0), with u(0) = 1/2,
    switching to t exp(-lambda0 t) u(t) when the eigenvalues coalesce.
    """
    t = np.asarray(t, dtype=float)
    lam0, lam1 = eigenvalues(lin)
    step = np.where(t > 0, 1.0, np.where(t == 0, 0.5, 0.0))
    tt = np.where(t > 0, t, 0.0)
    if abs(lam1 - lam0) < CONFLUENT_RTOL * max(abs(lam0), 1e-300):
        g = tt * np.exp(-lam0 * tt)
    else:
        g = (np.exp(-lam0 * tt) - np.exp(-lam1 * tt)) / (lam1 - lam0)
    out = step * g
    return out[()] if out.ndim == 0 else out


def spectral_density(omega, phi_lo: float, lin: Linearization, params: ResonatorParams):
    """Homodyne spectral density P_phiLO(omega) in terms of W and V."""
    _require_stable(lin)
    omega = np.asarray(omega, dtype=float)
    w, v = lin.w, lin.v
    lam0, lam1 = eigenvalues(lin)
    cross = 2.0 * (cmath.exp(2j * phi_lo) * w.conjugate() * v).real
    num = cross + np.abs(w + 1j * omega) ** 2 + abs(v) ** 2
    den = (omega**2 + lam0**2) * (omega**2 + lam1**2)
    out = (num / den).real * 2.0 * w.real * coth_factor(params)
    return out[()] if out.ndim == 0 else out


def spectral_density_zero(phi_lo: float, lin: Linearization, params: ResonatorParams) -> float:
    _require_stable(lin)
    z = lin.zeta
    shape = (1.0 + 2.0 * z * math.cos(phi_lo - lin.phi0) + z * z) / (1.0 - z * z) ** 2
    return shape * 2.0 * lin.w.real / abs(lin.w) ** 2 * coth_factor(params)


def spectrum_extrema(lin: Linearization, params: ResonatorParams) -> tuple[float, float, float, float]:
    """(P_max, P_min, phi_max, phi_min) of the zero-frequency density over phi_LO."""
    _require_stable(lin)
    z = lin.zeta
    base = 2.0 * lin.w.real / abs(lin.w) ** 2 * coth_factor(params)
    two_pi = 2.0 * math.pi
    return (
        base / (1.0 - z) ** 2,
        base / (1.0 + z) ** 2,
        lin.phi0 % two_pi,
        (lin.phi0 + math.pi) % two_pi,
    )


def integrated_spectrum(phi_lo: float, lin: Linearization, params: ResonatorParams) -> float:
    """(1/2pi) * integral of P_phiLO over all offset frequencies, reduced form."""
    _require_stable(lin)
    z = lin.zeta
    return (1.0 + z * math.cos(phi_lo - lin.phi0)) / (1.0 - z * z) * coth_factor(params)


def integrated_spectrum_residue(phi_lo: float, lin: Linearization, params: ResonatorParams) -> float:
    """Residue-sum value of (1/2pi) * integral P d omega written with W and V directly."""
    _require_stable(lin)
    w, v = lin.w, lin.v
    lam0, lam1 = eigenvalues(lin)
    cross = 2.0 * (cmath.exp(2j * phi_lo) * w.conjugate() * v).real
    ratio = (cross + 2.0 * abs(w) ** 2) / (lam0 * lam1 * (lam0 + lam1))
    return ratio.real * w.real * coth_factor(params)


def spectrum(omega, phi_lo: float, lin: Linearization, params: ResonatorParams) -> SpectrumResult:
    omega = np.asarray(omega, dtype=float)
    return SpectrumResult(
        omega=omega,
        values=spectral_density(omega, phi_lo, lin, params),
        phi_lo=phi_lo,
        zero_freq=spectral_density_zero(phi_lo, lin, params),
        integral=integrated_spectrum(phi_lo, lin, params),
    )


def estimator_variance(tau: float, phi_lo: float, lin: Linearization, params: ResonatorParams) -> float:
    """Variance of the time-averaged homodyne output, (2pi/tau) P_phiLO(0)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    t_rd = ring_down_time(lin)
    if tau < 10.0 * t_rd:
        warnings.warn(
            f"averaging time {tau:.4g} is not long compared with t_RD = {t_rd:.4g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return 2.0 * math.pi / tau * spectral_density_zero(phi_lo, lin, params)
