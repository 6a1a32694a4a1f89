"""Mass-detection figures of merit for homodyne readout of a driven resonator."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NanomassError, UnstableBranch
from .model import Drive, ResonatorParams
from .response import ring_down_time, spectral_density_zero
from .steady_state import Linearization, SteadyBranch, linearize, select_branch, solve_energy

G_GRID = 4096
PHASE_POLICIES = ("fixed", "optimal-g", "optimal-pmin")


class LinearBound(NamedTuple):
    delta_m_over_m: float
    t_rd: float
    quality: float


@dataclass(frozen=True)
class SensitivityReport:
    omega_p: float
    p: float
    branch: str = ""
    zeta: float = math.nan
    phi_lo: float = math.nan
    x0_mean: float = math.nan
    responsivity: float = math.nan
    g_value: float = math.nan
    g_min: float = math.nan
    phi_at_min: float = math.nan
    q_eff: float = math.nan
    u0: float = math.nan
    delta_m_over_m: float = math.nan
    t_rd: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def homodyne_mean(branch: SteadyBranch, phi_lo: float) -> float:
    """X0 = exp(i phi_LO) C_m + c.c."""
    return 2.0 * abs(branch.c_m) * math.cos(phi_lo + branch.phi_m)


def responsivity_omega0(branch: SteadyBranch, lin: Linearization, phi_lo: float) -> float:
    """Signed dX0/d omega0 of the mean homodyne output."""
    z = lin.zeta
    if z >= 1.0:
        raise UnstableBranch(f"responsivity diverges at the fold (zeta={z:.6g})")
    rot = complex(math.cos(phi_lo - lin.phi0 + lin.phi_c), math.sin(phi_lo - lin.phi0 + lin.phi_c))
    tilt = 1.0 - z * complex(math.cos(2.0 * lin.phi_c), -math.sin(2.0 * lin.phi_c))
    return 2.0 * abs(branch.c_m) / abs(lin.w) * (rot * tilt).real / (1.0 - z * z)


def g_function(phi, zeta: float, phi_c: float):
    """Phase factor multiplying the linear thermomechanical bound; +inf where blind."""
    phi = np.asarray(phi, dtype=float)
    num = np.sqrt(1.0 + 2.0 * zeta * np.cos(phi) + zeta * zeta)
    den = np.abs(np.cos(phi + phi_c) - zeta * np.cos(phi - phi_c))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return out[()] if out.ndim == 0 else out


def g_min(zeta: float, phi_c: float) -> tuple[float, float]:
    """Global minimum of g over phi in [0, 2pi) and its location."""
    if not 0.0 <= zeta < 1.0:
        raise ValueError("zeta must lie in [0, 1)")
    grid = np.arange(G_GRID) * (2.0 * math.pi / G_GRID)
    vals = g_function(grid, zeta, phi_c)
    i = int(np.argmin(vals))
    h = 2.0 * math.pi / G_GRID
    res = minimize_scalar(
        lambda x: float(g_function(x, zeta, phi_c)),
        bounds=(grid[i] - h, grid[i] + h),
        method="bounded",
        options={"xatol": 1e-10},
    )
    best, where = float(vals[i]), float(grid[i])
    if res.fun <= best:
        best, where = float(res.fun), float(res.x)
    return best, where % (2.0 * math.pi)


def quality_factor(params: ResonatorParams, lin: Linearization) -> float:
    """Q_eff = omega0 / W'."""
    return params.omega0 / lin.w.real


def stored_energy(params: ResonatorParams, branch: SteadyBranch) -> float:
    return params.units.hbar * params.omega0 * branch.energy


def _warn_assumptions(params: ResonatorParams, lin: Linearization, tau: float) -> None:
    if params.beta_hbar_omega0 > 0.1:
        warnings.warn(
            f"hbar*omega0/k_B*T = {params.beta_hbar_omega0:.3g} is not small; "
            "the high-temperature bound is approximate",
            RuntimeWarning,
            stacklevel=3,
        )
    t_rd = ring_down_time(lin)
    if tau < 10.0 * t_rd:
        warnings.warn(
            f"averaging time {tau:.4g} is not long compared with t_RD = {t_rd:.4g}",
            RuntimeWarning,
            stacklevel=3,
        )


def delta_m_nonlinear(
    branch: SteadyBranch, lin: Linearization, params: ResonatorParams, phi_lo: float, tau: float
) -> float:
    """Fractional minimum detectable mass, high-temperature g-function form."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if lin.zeta >= 1.0:
        raise UnstableBranch(f"no sensitivity bound at zeta={lin.zeta:.6g}")
    _warn_assumptions(params, lin, tau)
    g = float(g_function(phi_lo - lin.phi0, lin.zeta, lin.phi_c))
    u0 = stored_energy(params, branch)
    if not math.isfinite(g) or u0 == 0:
        return math.inf
    q = quality_factor(params, lin)
    return 2.0 * math.sqrt(2.0 * math.pi * params.thermal_energy / (q * params.omega0 * tau * u0)) * g


def delta_m_from_spectrum(
    branch: SteadyBranch, lin: Linearization, params: ResonatorParams, phi_lo: float, tau: float
) -> float:
    """Same bound assembled from the zero-frequency density and the responsivity."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    resp = abs(responsivity_omega0(branch, lin, phi_lo))
    if resp == 0:
        return math.inf
    p0 = spectral_density_zero(phi_lo, lin, params)
    return 2.0 / params.omega0 * math.sqrt(2.0 * math.pi / tau) * math.sqrt(p0) / resp


def delta_m_linear(
    params: ResonatorParams, u0: float, tau: float, quality: float | None = None
) -> LinearBound:
    """Linear-regime thermomechanical bound and ring-down time; Q defaults to omega0/gamma."""
    if u0 <= 0 or tau <= 0:
        raise ValueError("u0 and tau must be positive")
    q = params.omega0 / params.gamma if quality is None else quality
    dm = 2.0 * math.sqrt(2.0 * math.pi / (q * params.omega0 * tau) * params.thermal_energy / u0)
    return LinearBound(dm, q / params.omega0, q)


def choose_phase(lin: Linearization, policy: str = "optimal-g", phi_lo: float = 0.0) -> float:
    if policy == "fixed":
        return phi_lo
    if policy == "optimal-g":
        return lin.phi0 + g_min(lin.zeta, lin.phi_c)[1]
    if policy == "optimal-pmin":
        return lin.phi0 + math.pi
    raise ValueError(f"unknown phase policy {policy!r}; expected one of {PHASE_POLICIES}")


def sensitivity_report(
    params: ResonatorParams,
    drive: Drive,
    tau: float,
    policy: str = "optimal-g",
    phi_lo: float = 0.0,
    branch: str | int = "low",
) -> SensitivityReport:
    b = select_branch(solve_energy(params, drive), branch)
    lin = linearize(b, params, drive)
    if not b.stability.is_stable or lin.zeta >= 1.0:
        raise UnstableBranch(f"branch {b.label} is not stable (zeta={lin.zeta:.6g})")
    phase = choose_phase(lin, policy, phi_lo)
    gmin, gphi = g_min(lin.zeta, lin.phi_c)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dm = delta_m_nonlinear(b, lin, params, phase, tau)
    return SensitivityReport(
        omega_p=drive.omega_p,
        p=drive.p,
        branch=b.label,
        zeta=lin.zeta,
        phi_lo=phase,
        x0_mean=homodyne_mean(b, phase),
        responsivity=abs(responsivity_omega0(b, lin, phase)),
        g_value=float(g_function(phase - lin.phi0, lin.zeta, lin.phi_c)),
        g_min=gmin,
        phi_at_min=gphi,
        q_eff=quality_factor(params, lin),
        u0=stored_energy(params, b),
        delta_m_over_m=dm,
        t_rd=ring_down_time(lin),
    )


def sensitivity_sweep(
    params: ResonatorParams,
    path: Iterable[Drive],
    tau: float,
    policy: str = "optimal-g",
    phi_lo: float = 0.0,
    branch: str | int = "low",
) -> list[SensitivityReport]:
    """One report per path point; failing points carry an error and the sweep continues."""
    reports = []
    for drive in path:
        try:
            reports.append(sensitivity_report(params, drive, tau, policy, phi_lo, branch))
        except (NanomassError, ValueError, IndexError) as exc:
            reports.append(SensitivityReport(drive.omega_p, drive.p, error=f"{type(exc).__name__}: {exc}"))
    return reports
