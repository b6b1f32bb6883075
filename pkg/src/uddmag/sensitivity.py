"""
Shot-noise-limited magnetometer sensitivity under Uhrig decoupling.

For a telegraph (square-wave) signal switching with the pulses, the phase
``gamma B tau`` is read out against the decoherence envelope, giving

    eta(tau) = exp[chi(tau)] / (C gamma sqrt(tau))

in T Hz^-1/2, with ``chi`` the decay exponent of the decoupled bath. AC and
fast-fluctuating signals rescale this by constant factors; finite pulse
widths and pulse errors multiply it by a penalty that grows with pulse count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .bath import GAMMA_E, NoiseEnvironment, theta
from .dephasing import DephasingModel, decay_exponent, udd_model
from .errors import DomainError, RegimeError

MODES = ("telegraph", "ac", "fluctuating")
F_E_CALIBRATION_MAX_N = 40


@dataclass(frozen=True)
class MeasurementConfig:
    """Readout and control parameters.

    ``C`` is the readout efficiency, ``pulse_width`` the pi-pulse duration
    (0 for ideal pulses), ``pulse_error`` the fractional contrast lost per
    pulse and ``f_e`` the prefactor of :func:`eta_upper_bound` (``None``
    calibrates it from the bath).
    """

    C: float = 1.0
    gamma: float = GAMMA_E
    pulse_width: float = 0.0
    pulse_error: float = 0.01
    f_e: float | None = None

    def __post_init__(self):
        if not 0 < self.C <= 1:
            raise DomainError(f"C must lie in (0, 1], got {self.C!r}")
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if not self.pulse_width >= 0:
            raise DomainError("pulse_width must be non-negative")
        if not 0 <= self.pulse_error < 1:
            raise DomainError("pulse_error must lie in [0, 1)")
        if self.f_e is not None and not self.f_e > 0:
            raise DomainError("f_e must be positive")


@dataclass(frozen=True)
class SensitivityPoint:
    pulses: int
    tau: float
    eta: float
    mode: str = "telegraph"
    penalty: float = 1.0


def min_phase(envelope_value: float, n_measurements: int, C: float = 1.0) -> float:
    """Smallest resolvable phase ``1 / (C sqrt(N) D)`` after ``N`` shots."""
    return 1.0 / (C * math.sqrt(n_measurements) * envelope_value)


def eta_from_model(model: DephasingModel, tau: float, cfg: MeasurementConfig) -> float:
    """Telegraph sensitivity for an arbitrary dephasing model."""
    if not tau > 0:
        raise DomainError("interrogation time must be positive")
    log_eta = float(decay_exponent(model, tau)) - math.log(cfg.C * cfg.gamma) - 0.5 * math.log(tau)
    return math.exp(log_eta) if log_eta < 700 else math.inf


def _model(n, env, cfg):
    if n < 0 or int(n) != n:
        raise DomainError(f"pulse count must be a non-negative integer, got {n!r}")
    return udd_model(int(n), env, cfg.gamma)


def eta_telegraph(n: int, tau: float, env: NoiseEnvironment, cfg: MeasurementConfig) -> float:
    """Sensitivity to a square-wave field synchronised with ``n`` Uhrig pulses."""
    return eta_from_model(_model(n, env, cfg), tau, cfg)


def leading_order_optimum(model: DephasingModel) -> float:
    """Stationary point of ``exp[(Gamma t)^p] / sqrt(t)`` for the lowest-order term.

    ``p = 2s + 2`` for start order ``s``; the optimum sits where
    ``(Gamma t)^p = 1 / (2p)``, i.e. ``t = (2p)^(-1/p) / Gamma``.
    """
    if model.is_trivial():
        return math.inf
    p = float(model.exponents[0])
    return math.exp(-model.log_rates[0]) * (2.0 * p) ** (-1.0 / p)


def optimal_tau_for_model(model: DephasingModel, cfg: MeasurementConfig, tau_max: float | None = None):
    """Minimise the telegraph sensitivity over ``tau`` in ``(0, tau_max]``.

    ``log eta`` is convex in ``log tau`` with derivative
    ``sum_k p_k (Gamma_k tau)^p_k - 1/2``, so the optimum is the root of that
    derivative, or the ceiling if the derivative is still negative there.
    Returns ``(tau, eta)``.
    """
    tau_max = model.tau_c if tau_max is None else tau_max

    def slope(lt):
        if model.is_trivial():
            return -0.5
        terms = model.exponents * (model.log_rates + lt)
        m = terms.max()
        with np.errstate(over="ignore"):
            return float(np.exp(m) * np.sum(model.exponents * np.exp(terms - m))) - 0.5

    hi = math.log(tau_max)
    if slope(hi) <= 0:
        return tau_max, eta_from_model(model, tau_max, cfg)
    # the lowest-order stationary point bounds the full optimum from above
    seed = min(leading_order_optimum(model), tau_max)
    lo = math.log(seed) - 1.0
    while slope(lo) > 0:
        lo -= 2.0
    lt = brentq(slope, lo, min(math.log(seed) + 0.1, hi), xtol=1e-14, rtol=1e-13)
    tau = math.exp(lt)
    return tau, eta_from_model(model, tau, cfg)


def optimal_tau(n: int, env: NoiseEnvironment, cfg: MeasurementConfig):
    """Optimal interrogation time (capped at ``tau_c``) and its sensitivity for ``n`` pulses."""
    return _optimal_tau_cached(int(n), env, replace(cfg, C=1.0, f_e=None), cfg.C)


@lru_cache(maxsize=2048)
def _optimal_tau_cached(n, env, cfg_unit, C):
    tau, eta = optimal_tau_for_model(_model(n, env, cfg_unit), cfg_unit)
    return tau, eta / C


def calibrate_f_e(env: NoiseEnvironment, cfg: MeasurementConfig, n_max: int = F_E_CALIBRATION_MAX_N) -> float:
    """Smallest ``f_e`` for which the upper bound dominates the optimum for ``1 <= n <= n_max``."""
    th = theta(env, cfg.gamma)
    return max(
        (cfg.C * cfg.gamma * optimal_tau(n, env, cfg)[1]) ** 2 * th ** (1.0 / n) for n in range(1, n_max + 1)
    )


def eta_upper_bound(n: int, env: NoiseEnvironment, cfg: MeasurementConfig) -> float:
    """Approximate envelope ``sqrt(f_e Theta^(-1/n)) / (C gamma)`` of the optimised sensitivity."""
    if n < 1:
        raise DomainError("the upper bound is undefined for n < 1")
    f_e = cfg.f_e if cfg.f_e is not None else calibrate_f_e(env, cfg)
    return math.sqrt(f_e * theta(env, cfg.gamma) ** (-1.0 / n)) / (cfg.C * cfg.gamma)


def eta_ac(n: int, tau: float, env: NoiseEnvironment, cfg: MeasurementConfig) -> float:
    """Sensitivity to a synchronised AC field: a pi/2 penalty on the telegraph value."""
    return 0.5 * math.pi * eta_telegraph(n, tau, env, cfg)


def gamma_ext(sigma_ext: float, tau_ext: float, cfg: MeasurementConfig) -> float:
    """Motional-narrowing decay rate ``gamma^2 sigma^2 tau / 2`` of a fast random field."""
    if sigma_ext < 0:
        raise DomainError("sigma_ext must be non-negative")
    if not tau_ext > 0:
        raise DomainError("tau_ext must be positive")
    return 0.5 * cfg.gamma**2 * sigma_ext**2 * tau_ext


def eta_fluctuating(n: int, tau: float, env: NoiseEnvironment, theta_ext: float, cfg: MeasurementConfig) -> float:
    """Sensitivity to the RMS of a fast random field, ``2 Theta_ext`` times the telegraph value."""
    if not theta_ext >= 1:
        raise RegimeError(f"fluctuating-field sensitivity needs Theta_ext >= 1, got {theta_ext!r}")
    return 2.0 * theta_ext * eta_telegraph(n, tau, env, cfg)


def pulse_penalty(n: int, env: NoiseEnvironment, cfg: MeasurementConfig) -> float:
    """Degradation factor from ``n`` imperfect pulses.

    Each pulse keeps a fraction ``1 - pulse_error`` of the contrast, and a
    finite Rabi frequency ``Omega = pi / pulse_width`` adds
    ``(n+1)/4 (sqrt(pi) gamma sigma0 / Omega)^4``.
    """
    if n < 0:
        raise DomainError("pulse count must be non-negative")
    m = n + 1
    rabi_term = 0.0
    if cfg.pulse_width > 0:
        omega = math.pi / cfg.pulse_width
        rabi_term = 0.25 * m * (math.sqrt(math.pi) * cfg.gamma * env.sigma0 / omega) ** 4
    return (1.0 - cfg.pulse_error) ** (-m) * (1.0 + rabi_term)


def rabi_envelope(t, env: NoiseEnvironment, cfg: MeasurementConfig):
    """Decay ``[1 + (gamma^2 sigma0^2 t / Omega)^2]^(-1/4)`` while driving at ``Omega = pi / pulse_width``."""
    if cfg.pulse_width == 0:
        return np.ones_like(np.asarray(t, dtype=float))
    omega = math.pi / cfg.pulse_width
    x = cfg.gamma**2 * env.sigma0**2 * np.asarray(t, dtype=float) / omega
    return (1.0 + x**2) ** -0.25


def _mode_factor(mode: str, theta_ext: float | None) -> float:
    if mode == "telegraph":
        return 1.0
    if mode == "ac":
        return 0.5 * math.pi
    if mode == "fluctuating":
        if theta_ext is None or not theta_ext >= 1:
            raise RegimeError("fluctuating mode needs theta_ext >= 1")
        return 2.0 * theta_ext
    raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}")


def sensitivity_curve(
    env: NoiseEnvironment,
    cfg: MeasurementConfig,
    n_max: int,
    mode: str = "telegraph",
    theta_ext: float | None = None,
    penalize: bool = True,
) -> list[SensitivityPoint]:
    """Optimised sensitivity for every pulse count ``0 .. n_max``."""
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    factor = _mode_factor(mode, theta_ext)
    points = []
    for n in range(n_max + 1):
        tau, eta = optimal_tau(n, env, cfg)
        pen = pulse_penalty(n, env, cfg) if penalize else 1.0
        points.append(SensitivityPoint(n, tau, eta * factor * pen, mode, pen))
    return points


def optimize_pulses(
    env: NoiseEnvironment,
    cfg: MeasurementConfig,
    n_max: int,
    mode: str = "telegraph",
    theta_ext: float | None = None,
) -> SensitivityPoint:
    """Pulse count minimising the penalised optimal sensitivity over ``0 .. n_max``."""
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    return min(sensitivity_curve(env, cfg, n_max, mode, theta_ext), key=lambda p: p.eta)
