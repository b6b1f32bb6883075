"""
Taylor-regime dephasing rates and decoherence envelopes.

Each Taylor coefficient ``a_j`` of a Gaussian bath field contributes an
independent stretched-exponential factor ``exp[-(Gamma_j t)^(2j+2)]`` with

    Gamma_j = (gamma * sigma_j / (sqrt(2) * (j + 1)))^(1 / (j + 1)).

A pulse sequence rescales ``sigma_j`` by ``|lambda_j|``; the orders it cancels
drop out of the product. All powers are evaluated in log space because the
exponents reach several hundred.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bath import GAMMA_E, NoiseEnvironment, log_sigma_taylor
from .errors import DomainError
from .sequences import PulseSequence, exact_lambdas, first_unsuppressed_order, free_induction, udd

TERM_THRESHOLD = 1e-18
MAX_ORDERS = 512


@dataclass(frozen=True)
class DephasingModel:
    """Family of rates ``Gamma_k`` defining a product of stretched exponentials.

    Attributes
    ----------
    rates : tuple of (int, float)
        ``(k, Gamma_k)`` pairs in increasing order, rates in s^-1.
    start_order : int
        Lowest order with a non-zero rate.
    truncation_order : int
        Highest retained order.
    tau_c : float
        Correlation time of the bath the model was built from (s).
    pulse_count : int or None
        Number of pulses of the generating sequence, when known.
    """

    rates: tuple
    start_order: int
    truncation_order: int
    tau_c: float
    pulse_count: int | None = None
    _orders: np.ndarray = field(init=False, repr=False, compare=False)
    _log_rates: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = tuple((int(k), float(g)) for k, g in self.rates)
        object.__setattr__(self, "rates", pairs)
        if any(g < 0 or not math.isfinite(g) for _, g in pairs):
            raise DomainError("rates must be finite and non-negative")
        ks = [k for k, _ in pairs]
        if ks != sorted(set(ks)):
            raise DomainError("rate orders must be strictly increasing")
        if pairs and (ks[0] < self.start_order or ks[-1] > self.truncation_order):
            raise DomainError("rate orders must lie within [start_order, truncation_order]")
        if not self.tau_c > 0:
            raise DomainError("tau_c must be positive")
        kept = [(k, g) for k, g in pairs if g > 0]
        object.__setattr__(self, "_orders", np.array([k for k, _ in kept], dtype=float))
        object.__setattr__(self, "_log_rates", np.log(np.array([g for _, g in kept], dtype=float)))

    @property
    def exponents(self) -> np.ndarray:
        """Stretching exponents ``2k + 2`` of the non-zero terms."""
        return 2.0 * self._orders + 2.0

    @property
    def log_rates(self) -> np.ndarray:
        return self._log_rates

    def is_trivial(self) -> bool:
        return self._orders.size == 0

    def rate(self, k: int) -> float:
        for order, g in self.rates:
            if order == k:
                return g
        return 0.0


def gamma_rate(sigma_j: float, j: int, gamma: float = GAMMA_E) -> float:
    """Dephasing rate of the order-``j`` Taylor term, ``((gamma sigma_j / sqrt 2) / (j+1))^(1/(j+1))``."""
    if sigma_j < 0 or j < 0:
        raise DomainError("sigma_j and j must be non-negative")
    if sigma_j == 0:
        return 0.0
    return (gamma * sigma_j / (math.sqrt(2.0) * (j + 1))) ** (1.0 / (j + 1))


def _log_rate(log_sigma: float, j: int, gamma: float, log_abs_lambda: float = 0.0) -> float:
    return (math.log(gamma / math.sqrt(2.0)) + log_sigma + log_abs_lambda - math.log(j + 1)) / (j + 1)


def default_truncation(
    env: NoiseEnvironment,
    gamma: float,
    start: int,
    t_max: float,
    threshold: float = TERM_THRESHOLD,
    max_orders: int = MAX_ORDERS,
) -> int:
    """Highest order to retain so the dropped terms are negligible up to ``t_max``.

    Uses the ``|lambda| = 1`` bound on every term, since decoupled lambda
    factors grow with order and the actual terms are not monotone. Orders
    are capped at ``start + max_orders - 1``.
    """
    lt = math.log(t_max)

    def log_bound(k):
        return (2 * k + 2) * (_log_rate(log_sigma_taylor(env, k), k, gamma) + lt)

    log_thr = math.log(threshold)
    k = start
    while k - start + 1 < max_orders:
        b1, b2 = log_bound(k + 1), log_bound(k + 2)
        if b1 < log_thr and b2 < b1:
            break
        k += 1
    return k


def modified_model(
    seq: PulseSequence,
    env: NoiseEnvironment,
    gamma: float = GAMMA_E,
    truncation: int | None = None,
    t_max: float | None = None,
) -> DephasingModel:
    """Rates of the bath under a pulse sequence, ``sigma_j -> |lambda_j| sigma_j``.

    Orders cancelled by the sequence are omitted. With ``truncation=None``
    the order cut is chosen by :func:`default_truncation` for times up to
    ``t_max`` (default ``env.tau_c``).
    """
    start = first_unsuppressed_order(seq)
    if truncation is None:
        truncation = default_truncation(env, gamma, start, env.tau_c if t_max is None else t_max)
    if truncation < start:
        raise DomainError(f"truncation order {truncation} is below the first unsuppressed order {start}")
    lam = np.abs(exact_lambdas(seq, start, truncation))
    rates = []
    for k, lk in zip(range(start, truncation + 1), lam):
        if lk == 0.0:
            continue
        rates.append((k, math.exp(_log_rate(log_sigma_taylor(env, k), k, gamma, math.log(lk)))))
    return DephasingModel(tuple(rates), start, truncation, env.tau_c, seq.pulse_count)


def free_model(env: NoiseEnvironment, gamma: float = GAMMA_E, truncation: int | None = None) -> DephasingModel:
    """Unrefocused rates (free induction decay)."""
    return modified_model(free_induction(env.tau_c), env, gamma, truncation)


@lru_cache(maxsize=512)
def udd_model(n: int, env: NoiseEnvironment, gamma: float = GAMMA_E, truncation: int | None = None) -> DephasingModel:
    """Cached :func:`modified_model` for the ``n``-pulse Uhrig sequence."""
    return modified_model(udd(n, env.tau_c), env, gamma, truncation)


def model_from_rates(rates, tau_c: float, pulse_count: int | None = None) -> DephasingModel:
    """Build a model directly from ``{order: rate}`` or ``(order, rate)`` pairs."""
    pairs = sorted(dict(rates).items())
    if not pairs:
        raise DomainError("at least one rate is required")
    return DephasingModel(tuple(pairs), pairs[0][0], pairs[-1][0], tau_c, pulse_count)


def log_decay_exponent(model: DephasingModel, t):
    """``log sum_k (Gamma_k t)^(2k+2)``; ``-inf`` at ``t = 0`` or for a trivial model."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("time must be non-negative")
    if model.is_trivial():
        out = np.full(t_arr.shape, -np.inf)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            a = model.exponents * (model.log_rates + np.log(t_arr)[..., None])
            top = a.max(axis=-1)
            out = top + np.log(np.exp(a - top[..., None]).sum(axis=-1))
        out = np.where(t_arr == 0, -np.inf, out)
    return float(out) if out.ndim == 0 else out


def decay_exponent(model: DephasingModel, t):
    """``chi(t) = sum_k (Gamma_k t)^(2k+2)``, so that the envelope is ``exp(-chi)``."""
    with np.errstate(over="ignore"):
        return np.exp(log_decay_exponent(model, t))


def envelope(model: DephasingModel, t):
    """Decoherence envelope ``prod_k exp[-(Gamma_k t)^(2k+2)]``."""
    return np.exp(-decay_exponent(model, t))


def leading_order_envelope(model: DephasingModel, t):
    """Envelope keeping only the lowest-order non-zero rate."""
    if model.is_trivial():
        return envelope(model, t)
    k = model._orders[0]
    lead = DephasingModel(((int(k), math.exp(model.log_rates[0])),), int(k), int(k), model.tau_c, model.pulse_count)
    return envelope(lead, t)
