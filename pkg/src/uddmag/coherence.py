"""Coherence times under decoupling and their dependence on pulse count."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from scipy.optimize import bisect

from .bath import GAMMA_E, NoiseEnvironment
from .dephasing import DephasingModel, log_decay_exponent, udd_model
from .errors import DomainError

ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class CoherencePoint:
    """Coherence time of one sequence; ``capped`` marks the ``tau_c`` ceiling."""

    pulses: int | None
    t2: float
    capped: bool


def coherence_time(model: DephasingModel) -> CoherencePoint:
    """Positive root of ``sum_k (Gamma_k t)^(2k+2) = 1``, clamped at ``tau_c``.

    The sum is strictly increasing in ``t``. Its log is bisected in
    ``log t`` because the raw function spans hundreds of decades across
    the bracket.
    """
    tau_c = model.tau_c
    if model.is_trivial():
        return CoherencePoint(model.pulse_count, tau_c, True)

    def f(lt):
        return log_decay_exponent(model, math.exp(lt))

    hi = math.log(10.0 * tau_c)
    if f(hi) <= 0.0:
        return CoherencePoint(model.pulse_count, tau_c, True)
    # every term is below 1 when t < 1 / (max rate * n_terms^(1/2))
    lo = -float(model.log_rates.max()) - math.log(len(model.log_rates)) - 1.0
    root = math.exp(bisect(f, lo, hi, xtol=ROOT_RTOL / 8, rtol=ROOT_RTOL / 8, maxiter=500))
    if root > tau_c:
        return CoherencePoint(model.pulse_count, tau_c, True)
    return CoherencePoint(model.pulse_count, root, False)


def coherence_curve(
    pulse_counts, env: NoiseEnvironment, gamma: float = GAMMA_E, n_jobs: int = 1
) -> list[CoherencePoint]:
    """Coherence time of the Uhrig sequence for each pulse count, in input order."""
    counts = list(pulse_counts)
    if not counts:
        raise DomainError("pulse_counts must be non-empty")
    if any(n < 0 for n in counts):
        raise DomainError("pulse counts must be non-negative")

    def one(n):
        return coherence_time(udd_model(int(n), env, gamma))

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            return list(ex.map(one, counts))
    return [one(n) for n in counts]
