"""Mean-field steady states of the driven Duffing envelope equation.

The slow amplitude C obeys dC/dt = -Theta(C, C*) with

    Theta = [gamma + i(omega0 - omega_p) + (iK + gamma3)|C|^2] C - p^(1/2) e^(i phi_p).

Fixed points have energy E = |C_m|^2 solving the real cubic

    [(gamma + gamma3 E)^2 + (omega0 - omega_p + K E)^2] E = p,

and small fluctuations c = C - C_m obey dc/dt = -(W c + V c*).
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DivergentSlope, InconsistentRoot, NoConvergence
from .model import Drive, ResonatorParams

REAL_ROOT_TOL = 1e-9
FOLD_PAIR_TOL = 1e-6
# Eigenvalue roots of a triple root scatter by ~eps^(1/3).
CUSP_CLUSTER_TOL = 1e-4
SLOPE_TOL = 1e-12


class Stability(enum.Enum):
    STABLE_LOW = "stable_low"
    SADDLE = "saddle"
    STABLE_HIGH = "stable_high"
    UNIQUE_STABLE = "unique_stable"
    MARGINAL = "marginal"

    @property
    def is_stable(self) -> bool:
        return self in (Stability.STABLE_LOW, Stability.STABLE_HIGH, Stability.UNIQUE_STABLE)


@dataclass(frozen=True)
class SteadyBranch:
    energy: float
    phi_m: float
    c_m: complex
    stability: Stability
    index: int = 1
    fold_degenerate: bool = False

    @property
    def label(self) -> str:
        return f"C{self.index}"


@dataclass(frozen=True)
class Linearization:
    w: complex
    v: complex
    zeta: float
    lambda0: complex
    lambda1: complex
    phi0: float
    phi_a: float
    phi_c: float
    degenerate_phase: bool = False

    @property
    def w_real(self) -> float:
        return self.w.real

    @property
    def det(self) -> float:
        """lambda0 * lambda1 = |W|^2 - |V|^2."""
        return abs(self.w) ** 2 - abs(self.v) ** 2

    @property
    def is_stable(self) -> bool:
        return self.det > 0 and self.w.real > 0

    def matrix(self) -> np.ndarray:
        """Real 2x2 matrix M with d(x, y)/dt = -M (x, y) for c = x + iy."""
        w, v = self.w, self.v
        return np.array(
            [[w.real + v.real, -w.imag + v.imag], [w.imag + v.imag, w.real - v.real]]
        )


class PrincipalAxes(NamedTuple):
    r_xi: complex
    r_eta: complex
    phi: float
    degenerate: bool


def cubic_coefficients(params: ResonatorParams, drive: Drive) -> tuple[float, float, float, float]:
    """Coefficients (a, b, c, d) of a E^3 + b E^2 + c E + d = 0."""
    g, g3, k = params.gamma, params.gamma3, params.kerr
    det = params.omega0 - drive.omega_p
    return g3 * g3 + k * k, 2.0 * (g * g3 + det * k), g * g + det * det, -drive.p


def energy_residual(energy, params: ResonatorParams, drive: Drive):
    a, b, c, d = cubic_coefficients(params, drive)
    e = np.asarray(energy, dtype=float)
    return ((a * e + b) * e + c) * e + d


def theta(c, params: ResonatorParams, drive: Drive):
    """Noiseless drift term Theta(C, C*); works on scalars and arrays."""
    c = np.asarray(c, dtype=complex)
    det = params.omega0 - drive.omega_p
    nl = complex(params.gamma3, params.kerr)
    out = (complex(params.gamma, det) + nl * (c.real**2 + c.imag**2)) * c - drive.amplitude
    return out[()] if out.ndim == 0 else out


def _polish(coeffs: tuple[float, ...], x: float, steps: int = 2) -> float:
    a, b, c, d = coeffs
    for _ in range(steps):
        f = ((a * x + b) * x + c) * x + d
        df = (3.0 * a * x + 2.0 * b) * x + c
        if df == 0:
            break
        x -= f / df
    return x


def _double_root(coeffs: tuple[float, ...], x: float) -> float:
    # A double root is a root of the derivative; Newton on f' converges fast.
    a, b, c, _ = coeffs
    for _ in range(4):
        df = (3.0 * a * x + 2.0 * b) * x + c
        d2f = 6.0 * a * x + 2.0 * b
        if d2f == 0:
            break
        x -= df / d2f
    return x


def _real_roots(params: ResonatorParams, drive: Drive) -> list[tuple[float, bool]]:
    """Nonnegative real roots of the energy cubic as (E, fold_degenerate)."""
    a, b, c, d = cubic_coefficients(params, drive)
    p = drive.p
    if p == 0:
        return [(0.0, False)]
    if a == 0:
        return [(p / c, False)]
    # Rescale E = s*u so the cubic and linear coefficients are both one.
    s = math.sqrt(c / a)
    scaled = (1.0, b * s / c, 1.0, d / (c * s))
    raw = np.roots(scaled)
    centre = -scaled[1] / 3.0
    if np.all(np.abs(raw - centre) < CUSP_CLUSTER_TOL * (1.0 + abs(centre))):
        # Triple coalescence at the cusp; Vieta gives the mean root exactly.
        if centre * s < 0:
            raise NoConvergence("cusp root is negative")
        return [(float(centre * s), True)] * 3
    found: list[tuple[float, bool]] = []
    pair: list[complex] = []
    for u in raw:
        if abs(u.imag) < REAL_ROOT_TOL * (1.0 + abs(u.real)):
            found.append((_polish(scaled, float(u.real)), False))
        elif abs(u.imag) < FOLD_PAIR_TOL * (1.0 + abs(u.real)):
            pair.append(u)
    if len(pair) == 2:
        u = _double_root(scaled, float(pair[0].real))
        found += [(u, True), (u, True)]
    found.sort()
    # Distinct but nearly coalesced real roots sit on the fold as well.
    for i in range(len(found) - 1):
        if abs(found[i + 1][0] - found[i][0]) < FOLD_PAIR_TOL * (1.0 + abs(found[i][0])):
            found[i] = (found[i][0], True)
            found[i + 1] = (found[i + 1][0], True)
    roots = []
    tol = 1e-9 * max(1.0, p)
    for u, fold in found:
        e = u * s
        if e < 0:
            continue
        if not fold and abs(float(energy_residual(e, params, drive))) > tol:
            raise NoConvergence(f"cubic root E={e!r} failed to polish (p={p!r})")
        roots.append((float(e), fold))
    if not roots:
        raise NoConvergence("energy cubic has no nonnegative real root")
    return roots


def mean_amplitude(
    energy: float,
    params: ResonatorParams,
    drive: Drive,
    stability: Stability = Stability.UNIQUE_STABLE,
    index: int = 1,
    fold_degenerate: bool = False,
) -> SteadyBranch:
    """Fill in the phase of C_m for a solved energy."""
    if energy < 0:
        raise InconsistentRoot("energy must be nonnegative")
    if energy == 0:
        if drive.p > 0:
            raise InconsistentRoot("E = 0 cannot balance a nonzero drive")
        return SteadyBranch(0.0, 0.0, 0j, stability, index, fold_degenerate)
    if drive.p == 0:
        raise InconsistentRoot("nonzero energy without drive")
    det = params.omega0 - drive.omega_p
    z = complex(params.gamma + params.gamma3 * energy, det + params.kerr * energy)
    phi_m = drive.phi_p - cmath.phase(z)
    phi_m = math.atan2(math.sin(phi_m), math.cos(phi_m))
    c_m = math.sqrt(energy) * cmath.exp(1j * phi_m)
    return SteadyBranch(energy, phi_m, c_m, stability, index, fold_degenerate)


def linearize(branch: SteadyBranch, params: ResonatorParams, drive: Drive) -> Linearization:
    det = params.omega0 - drive.omega_p
    nl = complex(params.gamma3, params.kerr)
    e = branch.energy
    w = complex(params.gamma, det) + 2.0 * nl * e
    v = nl * branch.c_m**2
    aw, av = abs(w), abs(v)
    zeta = av / aw
    root = cmath.sqrt(av * av - w.imag * w.imag)
    lam0, lam1 = w.real + root, w.real - root
    if av == 0:
        return Linearization(w, v, 0.0, lam0, lam1, 0.0, 0.0, branch.phi_m - 0.5 * math.pi, True)
    arg_w, arg_v = cmath.phase(w), cmath.phase(v)
    phi0 = 0.5 * (arg_w - arg_v)
    phi_a = arg_w - phi0
    phi_c = branch.phi_m - phi_a - 0.5 * math.pi
    return Linearization(w, v, zeta, lam0, lam1, phi0, phi_a, phi_c, False)


def classify(lin: Linearization, fold_degenerate: bool = False) -> str:
    """'stable', 'saddle' or 'marginal' from the eigenvalue signs alone."""
    scale = abs(lin.w) ** 2
    if fold_degenerate or abs(lin.det) <= 1e-12 * scale:
        return "marginal"
    if lin.det < 0:
        return "saddle"
    return "stable" if lin.w.real > 0 else "saddle"


def solve_energy(params: ResonatorParams, drive: Drive) -> list[SteadyBranch]:
    """All steady branches, ascending in E and labelled C1, C2, C3."""
    roots = _real_roots(params, drive)
    provisional = [
        mean_amplitude(e, params, drive, Stability.MARGINAL, i + 1, fold)
        for i, (e, fold) in enumerate(roots)
    ]
    kinds = [classify(linearize(b, params, drive), b.fold_degenerate) for b in provisional]
    stable_idx = [i for i, k in enumerate(kinds) if k == "stable"]
    out = []
    for i, (b, kind) in enumerate(zip(provisional, kinds)):
        if kind == "saddle":
            st = Stability.SADDLE
        elif kind == "marginal":
            st = Stability.MARGINAL
        elif len(provisional) == 1:
            st = Stability.UNIQUE_STABLE
        elif i == stable_idx[0]:
            st = Stability.STABLE_LOW
        else:
            st = Stability.STABLE_HIGH
        out.append(SteadyBranch(b.energy, b.phi_m, b.c_m, st, b.index, b.fold_degenerate))
    return out


def stable_branches(params: ResonatorParams, drive: Drive) -> list[SteadyBranch]:
    return [b for b in solve_energy(params, drive) if b.stability.is_stable]


def select_branch(branches: list[SteadyBranch], which: str | int = "low") -> SteadyBranch:
    """Pick a branch by label index (1..3) or by 'low' / 'high' / 'saddle'."""
    if isinstance(which, int) or str(which).isdigit():
        idx = int(which)
        for b in branches:
            if b.index == idx:
                return b
        raise ValueError(f"no branch C{idx} among {len(branches)} solutions")
    stable = [b for b in branches if b.stability.is_stable]
    if which == "low":
        return stable[0]
    if which == "high":
        return stable[-1]
    if which == "saddle":
        saddles = [b for b in branches if b.stability is Stability.SADDLE]
        if not saddles:
            raise ValueError("no saddle branch at this operating point")
        return saddles[0]
    raise ValueError(f"unknown branch selector {which!r}")


def _slope_denominator(lin: Linearization) -> float:
    denom = abs(lin.w) ** 2 * (1.0 - lin.zeta**2)
    if abs(1.0 - lin.zeta**2) < SLOPE_TOL:
        raise DivergentSlope("zeta = 1: the operating point sits on a fold")
    return denom


def dE_domega_p(
    branch: SteadyBranch, lin: Linearization, params: ResonatorParams, drive: Drive
) -> float:
    det = params.omega0 - drive.omega_p
    e = branch.energy
    return 2.0 * (det + params.kerr * e) * e / _slope_denominator(lin)


def dE_dp(branch: SteadyBranch, lin: Linearization) -> float:
    return 1.0 / _slope_denominator(lin)


def to_principal(z, phi: float):
    """Rotate to axes at angle phi: xi + i eta = exp(i phi) z."""
    z = np.asarray(z, dtype=complex)
    rot = complex(math.cos(phi), math.sin(phi))
    xi = 0.5 * (rot * z + np.conj(rot) * np.conj(z))
    eta = 0.5 * (-1j * rot * z + 1j * np.conj(rot) * np.conj(z))
    xi, eta = xi.real, eta.real
    if z.ndim == 0:
        return float(xi), float(eta)
    return xi, eta


def from_principal(xi, eta, phi: float):
    back = complex(math.cos(phi), -math.sin(phi))
    out = back * np.asarray(xi) + 1j * back * np.asarray(eta)
    return complex(out) if np.ndim(out) == 0 else out


def principal_decomposition(lin: Linearization) -> PrincipalAxes:
    """Coefficients with W z + V z* = R_xi xi + R_eta eta on the principal axes."""
    w, v = lin.w, lin.v
    if lin.degenerate_phase:
        return PrincipalAxes(w, 1j * w, 0.0, True)
    rot = cmath.exp(1j * lin.phi_a)
    aw, av = abs(w), abs(v)
    return PrincipalAxes(rot * (aw + av), 1j * rot * (aw - av), lin.phi0, False)


def rotation_coefficients(w: complex, v: complex, phi: float) -> tuple[complex, complex]:
    """R_xi, R_eta for an arbitrary rotation angle."""
    r = cmath.exp(1j * phi)
    return w / r + v * r, 1j * (w / r - v * r)
