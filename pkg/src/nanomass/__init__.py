"""Mass detection with a nonlinear nanomechanical resonator.

Steady states, bistability boundaries, fluctuation spectra, sensitivity
bounds and time-domain simulation of a driven Duffing mode with nonlinear
damping.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    NanomassError,
    NotBistable,
    NumericalError,
    SlowingDownDivergence,
    UnstableBranch,
)
from .model import Drive, ResonatorParams, UnitSystem, from_dimensionless, to_dimensionless
from .steady_state import Linearization, Stability, SteadyBranch, linearize, solve_energy

__all__ = [
    "ConfigError",
    "Drive",
    "Linearization",
    "NanomassError",
    "NotBistable",
    "NumericalError",
    "ResonatorParams",
    "SlowingDownDivergence",
    "Stability",
    "SteadyBranch",
    "UnitSystem",
    "UnstableBranch",
    "from_dimensionless",
    "linearize",
    "solve_energy",
    "to_dimensionless",
]
