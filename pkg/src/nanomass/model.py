"""Parameter records, unit conventions and drive/force conversions.

Two unit systems are supported. ``SI`` uses rad/s, kg, K and the CODATA
values of hbar and k_B. ``DIMENSIONLESS`` sets hbar = k_B = 1; after
:func:`to_dimensionless` it also fixes omega0 = 1 and mass = 1/2, which
makes the zero-point length x0 equal to one.

All rates (gamma, gamma3, kerr, omega_p) share the units of omega0 and the
drive strength ``p`` carries units of rate squared. The core formulas are
homogeneous in these units, so every downstream module accepts either system.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import constants


class UnitSystem(enum.Enum):
    SI = "si"
    DIMENSIONLESS = "dimensionless"

    @property
    def hbar(self) -> float:
        return constants.hbar if self is UnitSystem.SI else 1.0

    @property
    def k_b(self) -> float:
        return constants.k if self is UnitSystem.SI else 1.0


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ResonatorParams:
    """Physical constants of one resonator mode.

    ``gamma`` is the amplitude damping rate, so Q = omega0 / gamma in the
    linear regime. ``gamma3`` and ``kerr`` multiply the mode energy |C|^2.
    """

    omega0: float
    gamma: float
    gamma3: float
    kerr: float
    mass: float
    temperature: float
    units: UnitSystem = UnitSystem.SI

    def __post_init__(self) -> None:
        _check_finite(
            omega0=self.omega0,
            gamma=self.gamma,
            gamma3=self.gamma3,
            kerr=self.kerr,
            mass=self.mass,
            temperature=self.temperature,
        )
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma3 < 0:
            raise ValueError("gamma3 must be non-negative")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    @property
    def beta_hbar_omega0(self) -> float:
        """hbar*omega0/(k_B*T); infinite at T = 0."""
        if self.temperature == 0:
            return math.inf
        return self.units.hbar * self.omega0 / (self.units.k_b * self.temperature)

    @property
    def thermal_energy(self) -> float:
        return self.units.k_b * self.temperature

    def with_omega0(self, omega0: float) -> "ResonatorParams":
        return replace(self, omega0=omega0)


@dataclass(frozen=True)
class Drive:
    omega_p: float
    p: float
    phi_p: float = 0.0

    def __post_init__(self) -> None:
        _check_finite(omega_p=self.omega_p, p=self.p, phi_p=self.phi_p)
        if self.omega_p <= 0:
            raise ValueError("omega_p must be positive")
        if self.p < 0:
            raise ValueError("p must be non-negative")

    @property
    def amplitude(self) -> complex:
        """The complex drive term p^(1/2) exp(i phi_p) of the envelope equation."""
        return math.sqrt(self.p) * complex(math.cos(self.phi_p), math.sin(self.phi_p))


@dataclass(frozen=True)
class UnitScale:
    """Reference scales of the system a parameter set was normalized from.

    Multiplying a dimensionless quantity by the matching scale returns it to
    the source units.
    """

    omega0: float
    mass: float
    units: UnitSystem

    @property
    def time(self) -> float:
        return 1.0 / self.omega0

    @property
    def drive_strength(self) -> float:
        return self.omega0**2

    @property
    def energy(self) -> float:
        return self.units.hbar * self.omega0

    @property
    def temperature(self) -> float:
        return self.units.hbar * self.omega0 / self.units.k_b

    @property
    def length(self) -> float:
        return math.sqrt(self.units.hbar / (2.0 * self.mass * self.omega0))


def to_dimensionless(
    params: ResonatorParams, drive: Drive | None = None
) -> tuple[ResonatorParams, Drive | None, UnitScale]:
    """Normalize to omega0 = hbar = k_B = 1 and mass = 1/2."""
    scale = UnitScale(params.omega0, params.mass, params.units)
    w = params.omega0
    dl = ResonatorParams(
        omega0=1.0,
        gamma=params.gamma / w,
        gamma3=params.gamma3 / w,
        kerr=params.kerr / w,
        mass=0.5,
        temperature=params.temperature / scale.temperature,
        units=UnitSystem.DIMENSIONLESS,
    )
    dl_drive = None
    if drive is not None:
        dl_drive = Drive(drive.omega_p / w, drive.p / scale.drive_strength, drive.phi_p)
    return dl, dl_drive, scale


def from_dimensionless(
    params: ResonatorParams, drive: Drive | None, scale: UnitScale
) -> tuple[ResonatorParams, Drive | None]:
    """Inverse of :func:`to_dimensionless`."""
    w = scale.omega0
    out = ResonatorParams(
        omega0=params.omega0 * w,
        gamma=params.gamma * w,
        gamma3=params.gamma3 * w,
        kerr=params.kerr * w,
        mass=scale.mass,
        temperature=params.temperature * scale.temperature,
        units=scale.units,
    )
    out_drive = None
    if drive is not None:
        out_drive = Drive(drive.omega_p * w, drive.p * scale.drive_strength, drive.phi_p)
    return out, out_drive


def zero_point_length(params: ResonatorParams) -> float:
    """x0 = sqrt(hbar / (2 m omega0))."""
    return math.sqrt(params.units.hbar / (2.0 * params.mass * params.omega0))


def drive_to_force(p: float, phi_p: float, params: ResonatorParams, omega_p: float) -> complex:
    """Complex force amplitude f = -2i m omega_p x0 p^(1/2) exp(i phi_p)."""
    x0 = zero_point_length(params)
    return -2j * params.mass * omega_p * x0 * math.sqrt(p) * complex(math.cos(phi_p), math.sin(phi_p))


def force_to_drive(f: complex, params: ResonatorParams, omega_p: float) -> tuple[float, float]:
    """Return (p, phi_p) for a complex force amplitude; phi_p = 0 when f = 0."""
    f = complex(f)
    if not (math.isfinite(f.real) and math.isfinite(f.imag)):
        raise ValueError("force must be finite")
    if f == 0:
        return 0.0, 0.0
    x0 = zero_point_length(params)
    root = 1j * f / (2.0 * params.mass * omega_p * x0)
    return abs(root) ** 2, math.atan2(root.imag, root.real)


def thermal_occupation(omega, temperature: float, units: UnitSystem = UnitSystem.SI):
    """Bose occupation 1/(exp(hbar omega / k_B T) - 1); zero at T = 0."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        out = np.zeros_like(omega)
    else:
        out = 1.0 / np.expm1(units.hbar * omega / (units.k_b * temperature))
    return out[()] if out.ndim == 0 else out


def coth_factor(params: ResonatorParams) -> float:
    """coth(hbar omega0 / 2 k_B T), equal to 2<n> + 1; one at T = 0."""
    x = params.beta_hbar_omega0
    if math.isinf(x):
        return 1.0
    return 1.0 / math.tanh(0.5 * x)
