"""
Noise-environment parameters of a dilute 13C nuclear-spin bath in diamond.

The bath is described by an RMS field ``sigma0`` and a self-correlation time
``tau_c``. Both follow from the 13C number density; the higher Taylor
coefficients of the bath field are described by a configurable rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants as _sc

from .errors import DomainError

SIGMA_MODELS = ("power", "squared_exponential")

# 13C nuclear magnetic moment is 0.7024118 mu_N for spin 1/2.
G_CARBON13 = 1.4048236


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants used by the bath formulas (CODATA via ``scipy.constants``)."""

    gamma_e: float = _sc.physical_constants["electron gyromag. ratio"][0]
    gamma_c: float = G_CARBON13 * _sc.physical_constants["nuclear magneton"][0] / _sc.hbar
    mu0_over_4pi: float = _sc.mu_0 / (4.0 * math.pi)
    hbar: float = _sc.hbar
    mu_N: float = _sc.physical_constants["nuclear magneton"][0]
    g_c: float = G_CARBON13
    # diamond: 3.52 g cm^-3 of carbon at 12 g mol^-1
    n_carbon: float = 1.77e29

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")


DEFAULT_CONSTANTS = PhysicalConstants()
GAMMA_E = DEFAULT_CONSTANTS.gamma_e


@dataclass(frozen=True)
class NoiseEnvironment:
    """Gaussian field environment seen by the probe spin.

    Attributes
    ----------
    sigma0 : float
        RMS field strength (T).
    tau_c : float
        Self-correlation time of the field (s).
    concentration : float or None
        Isotope fraction the environment was derived from, if any.
    sigma_model : str
        Rule for the spread of the higher Taylor coefficients, see
        :func:`sigma_taylor`.
    """

    sigma0: float
    tau_c: float
    concentration: float | None = None
    sigma_model: str = field(default="power")

    def __post_init__(self):
        if not (self.sigma0 > 0 and math.isfinite(self.sigma0)):
            raise DomainError(f"sigma0 must be positive and finite, got {self.sigma0!r}")
        if not (self.tau_c > 0 and math.isfinite(self.tau_c)):
            raise DomainError(f"tau_c must be positive and finite, got {self.tau_c!r}")
        if self.sigma_model not in SIGMA_MODELS:
            raise DomainError(f"unknown sigma_model {self.sigma_model!r}; expected one of {SIGMA_MODELS}")


def bath_from_concentration(
    fraction: float, constants: PhysicalConstants = DEFAULT_CONSTANTS, sigma_model: str = "power"
) -> NoiseEnvironment:
    """Continuum estimate of the field spread and correlation time of a 13C bath.

    ``sigma0 = sqrt(2 pi / 3) (mu0 / 4 pi) n_c g_c mu_N`` and
    ``tau_c = sqrt(6 / pi) (4 pi hbar / mu0) / (n_c g_c^2 mu_N^2)`` with
    ``n_c = fraction * n_carbon``.
    """
    if not (0.0 < fraction <= 1.0):
        raise DomainError(f"isotope fraction must lie in (0, 1], got {fraction!r}")
    c = constants
    n_c = fraction * c.n_carbon
    sigma0 = math.sqrt(2.0 * math.pi / 3.0) * c.mu0_over_4pi * n_c * c.g_c * c.mu_N
    tau_c = math.sqrt(6.0 / math.pi) * (c.hbar / c.mu0_over_4pi) / (n_c * c.g_c**2 * c.mu_N**2)
    return NoiseEnvironment(sigma0=sigma0, tau_c=tau_c, concentration=fraction, sigma_model=sigma_model)


def theta(env: NoiseEnvironment, gamma: float = GAMMA_E) -> float:
    """Fluctuation-regime number ``1 / (gamma sigma0 tau_c)``; >> 1 is a fast bath."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    return 1.0 / (gamma * env.sigma0 * env.tau_c)


def log_sigma_taylor(env: NoiseEnvironment, j: int) -> float:
    """Natural log of :func:`sigma_taylor`; finite for orders where the value itself overflows."""
    if j < 0 or int(j) != j:
        raise DomainError(f"Taylor order must be a non-negative integer, got {j!r}")
    j = int(j)
    log_s = math.log(env.sigma0) - j * math.log(env.tau_c)
    if env.sigma_model == "squared_exponential":
        # Var(B^(j)(0)) = sigma0^2 (2j-1)!! / tau_c^(2j), a_j = B^(j)(0) / j!
        log_double_fact = math.lgamma(2 * j + 1) - j * math.log(2.0) - math.lgamma(j + 1)
        log_s += 0.5 * log_double_fact - math.lgamma(j + 1)
    return log_s


def sigma_taylor(env: NoiseEnvironment, j: int) -> float:
    """Spread of the order-``j`` Taylor coefficient of the bath field (T s^-j).

    The default ``power`` model is ``sigma0 / tau_c**j``. The
    ``squared_exponential`` model gives the exact coefficient spread of a
    stationary Gaussian field with correlation ``exp(-s^2 / (2 tau_c^2))``;
    both agree for ``j <= 1``.
    """
    if j == 0:
        return env.sigma0
    try:
        return math.exp(log_sigma_taylor(env, j))
    except OverflowError:
        return math.inf
