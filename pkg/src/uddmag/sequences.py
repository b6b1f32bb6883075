"""
Pi-pulse sequences and their Taylor-moment suppression diagnostics.

A sequence is a set of instantaneous pi pulses inside an interrogation window
``[0, total_time]``. Each pulse flips the sign of the accumulated phase, so the
probe sees the field multiplied by a switching function ``f(t) = +-1``. A field
component ``a_j t^j`` then contributes in proportion to

    lambda_j = (j + 1) * integral_0^1 f(x) x^j dx
             = 2 sum_k (-1)^(k-1) x_k^(j+1) + (-1)^P,

with ``x_k`` the pulse times as fractions of the window and ``P`` the pulse
count. ``lambda_j = 0`` means the order-``j`` term is fully refocused.

All public constructors speak in pulse counts: ``udd(n, tau)`` has ``n`` pulses
and cancels Taylor orders ``0 .. n-1``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from .errors import DomainError, ResourceError

DEFAULT_TOL = 1e-9
CDD_MAX_LEVEL = 12

_UDD_LABEL = re.compile(r"^udd\((\d+)\)$")


@dataclass(frozen=True)
class PulseSequence:
    """Pulse instants within an interrogation window.

    Attributes
    ----------
    total_time : float
        Interrogation time (s).
    pulse_times : tuple of float
        Strictly increasing pulse instants inside ``(0, total_time)``.
    label : str
        Generator tag: ``hahn``, ``udd(n)``, ``cdd(l)`` or ``custom``.
    """

    total_time: float
    pulse_times: tuple = ()
    label: str = "custom"

    def __post_init__(self):
        if not (self.total_time > 0 and math.isfinite(self.total_time)):
            raise DomainError(f"total_time must be positive and finite, got {self.total_time!r}")
        times = tuple(float(t) for t in self.pulse_times)
        object.__setattr__(self, "pulse_times", times)
        prev = 0.0
        for t in times:
            if not prev < t:
                raise DomainError("pulse times must be strictly increasing and positive")
            prev = t
        if times and not times[-1] < self.total_time:
            raise DomainError("pulse times must lie strictly inside the window")

    @property
    def pulse_count(self) -> int:
        return len(self.pulse_times)

    @property
    def fractions(self) -> np.ndarray:
        """Pulse times divided by the window length."""
        return np.asarray(self.pulse_times, dtype=float) / self.total_time

    def scaled(self, total_time: float) -> "PulseSequence":
        """The same sequence stretched to a new window length."""
        udd_n = _udd_count(self.label)
        if udd_n is not None:
            return udd(udd_n, total_time)
        if self.label == "hahn":
            return hahn(total_time)
        s = total_time / self.total_time
        return PulseSequence(total_time, tuple(t * s for t in self.pulse_times), self.label)


@dataclass(frozen=True)
class SuppressionReport:
    """Moment residuals ``r_0 .. r_M``, the suppression order and the lambda factors."""

    residuals: tuple
    order: int
    lam: tuple


def _udd_count(label: str):
    m = _UDD_LABEL.match(label)
    return int(m.group(1)) if m else None


def udd(n: int, tau: float) -> PulseSequence:
    """Uhrig sequence with ``n`` pulses at ``tau * sin^2(pi k / (2n + 2))``.

    ``n = 0`` gives the empty sequence (free induction).
    """
    if n < 0 or int(n) != n:
        raise DomainError(f"pulse count must be a non-negative integer, got {n!r}")
    n = int(n)
    k = np.arange(1, n + 1)
    times = tau * np.sin(np.pi * k / (2 * n + 2)) ** 2
    return PulseSequence(tau, tuple(times), f"udd({n})")


def free_induction(tau: float) -> PulseSequence:
    return udd(0, tau)


def hahn(tau: float) -> PulseSequence:
    """Single refocusing pulse at ``tau / 2``."""
    return PulseSequence(tau, (0.5 * tau,), "hahn")


def _cdd_fractions(level: int) -> list:
    # C_0 = free evolution; C_l = C_{l-1} X C_{l-1} X on half windows.
    if level == 0:
        return []
    inner = _cdd_fractions(level - 1)
    raw = [0.5 * x for x in inner] + [0.5] + [0.5 + 0.5 * x for x in inner] + [1.0]
    out = []
    for x in raw:
        if out and out[-1] == x:
            out.pop()  # two coincident pi pulses are the identity
        else:
            out.append(x)
    return out


def cdd(level: int, tau: float, max_level: int = CDD_MAX_LEVEL) -> PulseSequence:
    """Concatenated decoupling of the given recursion depth.

    Coincident pulses cancel pairwise and a pulse landing on the window end
    (a pure frame flip) is dropped, so ``cdd(1)`` is the Hahn echo and
    ``cdd(2)`` has pulses at ``tau/4`` and ``3 tau/4``.
    """
    if level < 1 or int(level) != level:
        raise DomainError(f"CDD level must be a positive integer, got {level!r}")
    if level > max_level:
        raise ResourceError(f"CDD level {level} exceeds the cap of {max_level} (pulse count grows as 2^level)")
    fr = [x for x in _cdd_fractions(int(level)) if x < 1.0]
    return PulseSequence(tau, tuple(tau * x for x in fr), f"cdd({int(level)})")


def moment_residual(seq: PulseSequence, m: int) -> float:
    """Normalized order-``m`` moment of the switching function.

    Computed segment by segment as ``sum_i s_i (x_{i+1}^{m+1} - x_i^{m+1})``
    over the constant-sign intervals; zero when the ``a_m t^m`` field term
    is cancelled.
    """
    if m < 0:
        raise DomainError("moment order must be non-negative")
    nodes = np.concatenate(([0.0], seq.fractions, [1.0]))
    powers = nodes ** (m + 1)
    signs = (-1.0) ** np.arange(len(nodes) - 1)
    return float(np.sum(signs * np.diff(powers)))


def lambda_factor(seq: PulseSequence, j: int) -> float:
    """Factor multiplying the Taylor coefficient ``a_j`` under the sequence."""
    if j < 0:
        raise DomainError("Taylor order must be non-negative")
    x = seq.fractions
    signs = (-1.0) ** np.arange(len(x))
    return float(2.0 * np.sum(signs * x ** (j + 1)) + (-1.0) ** len(x))


def suppression_order(seq: PulseSequence, tol: float = DEFAULT_TOL, max_order: int = 200) -> int:
    """Largest ``n`` with ``|r_m| < tol`` for every ``m <= n``; -1 if ``r_0`` fails."""
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    order = -1
    for m in range(max_order + 1):
        if abs(moment_residual(seq, m)) >= tol:
            break
        order = m
    return order


def suppression_report(seq: PulseSequence, max_order: int | None = None, tol: float = DEFAULT_TOL) -> SuppressionReport:
    if max_order is None:
        max_order = seq.pulse_count + 1
    res = tuple(moment_residual(seq, m) for m in range(max_order + 1))
    lam = tuple(lambda_factor(seq, j) for j in range(max_order + 1))
    return SuppressionReport(residuals=res, order=suppression_order(seq, tol), lam=lam)


def switching_function(seq: PulseSequence, t):
    """``(-1)**(number of pulses at or before t)`` for ``0 <= t <= total_time``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > seq.total_time):
        raise DomainError("switching function evaluated outside the interrogation window")
    flips = np.searchsorted(np.asarray(seq.pulse_times), t_arr, side="right")
    out = np.where(flips % 2 == 0, 1.0, -1.0)
    return float(out) if out.ndim == 0 else out


def identity_lhs(n: int, m: int) -> float:
    """``2 sum_{k=1}^{n+1} (-1)^(k-1) sin^(2m)(pi k / (2n + 4))``."""
    k = np.arange(1, n + 2)
    terms = (-1.0) ** (k - 1) * np.sin(np.pi * k / (2 * n + 4)) ** (2 * m)
    return float(2.0 * math.fsum(terms))


def verify_identity(n: int, m: int, atol: float = 1e-10) -> bool:
    """Check the alternating sine-power sum equals ``(-1)**n``.

    Only defined for ``1 <= m <= n + 1``; beyond that the sum is no longer a
    closed geometric series and the identity does not hold.
    """
    if n < 0:
        raise DomainError("n must be non-negative")
    if not 1 <= m <= n + 1:
        raise DomainError(f"identity requires 1 <= m <= n + 1, got n={n}, m={m}")
    return abs(identity_lhs(n, m) - (-1) ** n) <= atol


# float64 is trusted where the alternating sum loses fewer than two digits
_CANCELLATION_LIMIT = 1e-2


@lru_cache(maxsize=256)
def _exact_lambdas_cached(fractions: tuple, udd_n, first: int, last: int, dps: int) -> tuple:
    with mpmath.workdps(dps):
        if udd_n is not None:
            xs = [mpmath.sin(mpmath.pi * k / (2 * udd_n + 2)) ** 2 for k in range(1, udd_n + 1)]
        else:
            xs = [mpmath.mpf(x) for x in fractions]
        x = np.array([float(v) for v in xs])
        orders = np.arange(first, last + 1)
        signs = 2.0 * (-1.0) ** np.arange(len(xs))
        tail = (-1.0) ** len(xs)
        with np.errstate(under="ignore"):
            terms = signs[None, :] * x[None, :] ** (orders[:, None] + 1.0)
        lam = terms.sum(axis=1) + tail
        scale = np.abs(terms).sum(axis=1) + 1.0
        out = lam.tolist()
        # fixed point: x**j is held as the integer floor(x**j * 2**bits)
        bits = int(dps * 3.33) + 16
        one = 1 << bits
        fixed = [int(mpmath.floor(v * one)) for v in xs]
        power, at = None, None
        for i in np.nonzero(np.abs(lam) <= _CANCELLATION_LIMIT * scale)[0]:
            j = int(orders[i]) + 1
            if at is not None and j - at == 1:
                power = [(p * f) >> bits for p, f in zip(power, fixed)]
            else:
                power = [int(mpmath.floor(v**j * one)) for v in xs]
            at = j
            # add the +-1 tail before dividing so the cancellation stays exact
            out[i] = (2 * (sum(power[0::2]) - sum(power[1::2])) + int(tail) * one) / one
    return tuple(out)


def exact_lambdas(seq: PulseSequence, first: int, last: int) -> np.ndarray:
    """Lambda factors for orders ``first .. last`` in extended precision.

    The alternating sum cancels almost completely for long sequences (the
    first surviving UDD factor falls roughly as ``4**-n``), so float64 cannot
    resolve it. Orders with heavy cancellation are recomputed with mpmath;
    Uhrig times are then regenerated from their closed form, other sequences
    use their float pulse fractions exactly.
    """
    if first < 0 or last < first:
        raise DomainError("need 0 <= first <= last")
    udd_n = _udd_count(seq.label)
    if seq.label == "hahn":
        udd_n = 1
    frac = () if udd_n is not None else tuple(seq.fractions.tolist())
    dps = 40 + 2 * seq.pulse_count
    return np.array(_exact_lambdas_cached(frac, udd_n, first, last, dps))


def first_unsuppressed_order(seq: PulseSequence, search: int = 4096) -> int:
    """Lowest Taylor order with a non-zero lambda factor, in extended precision."""
    # extended-precision arithmetic noise sits near 10**-(dps)
    floor = 10.0 ** -(30 + 2 * seq.pulse_count)
    block = max(seq.pulse_count + 2, 8)
    lo = 0
    while lo < search:
        hits = np.nonzero(np.abs(exact_lambdas(seq, lo, lo + block - 1)) > floor)[0]
        if hits.size:
            return lo + int(hits[0])
        lo += block
    raise DomainError("sequence suppresses every Taylor order searched")
