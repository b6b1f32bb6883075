"""Magnetometry with Uhrig dynamical decoupling in a 13C nuclear-spin bath.

Submodules
----------
bath         bath parameters from the 13C concentration
sequences    pulse schedules, moment residuals and lambda factors
dephasing    decay exponents of decoupled coherence
coherence    coherence times against pulse count
sensitivity  optimised magnetic-field sensitivity
montecarlo   classical-noise Monte Carlo oracle
"""

__version__ = "0.1.0"

from .bath import GAMMA_E, NoiseEnvironment, PhysicalConstants, bath_from_concentration, theta
from .coherence import CoherencePoint, coherence_curve, coherence_time
from .dephasing import DephasingModel, envelope, free_model, modified_model, udd_model
from .errors import DomainError, RegimeError, ResolutionError, ResourceError, UddmagError
from .sensitivity import MeasurementConfig, SensitivityPoint, optimal_tau, optimize_pulses, sensitivity_curve
from .sequences import PulseSequence, cdd, free_induction, hahn, suppression_report, udd

__all__ = [
    "GAMMA_E",
    "CoherencePoint",
    "DephasingModel",
    "DomainError",
    "MeasurementConfig",
    "NoiseEnvironment",
    "PhysicalConstants",
    "PulseSequence",
    "RegimeError",
    "ResolutionError",
    "ResourceError",
    "SensitivityPoint",
    "UddmagError",
    "bath_from_concentration",
    "cdd",
    "coherence_curve",
    "coherence_time",
    "envelope",
    "free_induction",
    "free_model",
    "hahn",
    "modified_model",
    "optimal_tau",
    "optimize_pulses",
    "sensitivity_curve",
    "suppression_report",
    "theta",
    "udd",
    "udd_model",
]
