"""
Monte Carlo phase-accumulation oracle.

Classical field trajectories are sampled on a uniform grid, the probe phase
``gamma * integral f(t) B(t) dt`` is accumulated under a sequence's switching
function, and the envelope is estimated as the ensemble mean of ``cos(phase)``.
Nothing here uses the analytic rates, so the results are an independent check
of the dephasing and sensitivity modules.

Two noise kinds are available:

``ou``
    Stationary Ornstein-Uhlenbeck process (exponential correlation), sampled
    by its exact AR(1) discretisation. Paths are nowhere differentiable; this
    is the motional-narrowing model.
``smooth``
    Stationary Gaussian process with squared-exponential correlation
    ``sigma0^2 exp(-s^2 / (2 tau_c^2))``. Paths are analytic, so the Taylor
    coefficients of the field exist.

Every path ``i`` draws from its own generator seeded by ``(seed, i)``, so
results do not depend on block size or on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .bath import GAMMA_E, NoiseEnvironment
from .errors import DomainError, RegimeError, ResolutionError
from .sequences import PulseSequence, free_induction, switching_function

KINDS = ("ou", "smooth")
STEPS_PER_TAU = 100
MIN_TRAJECTORIES = 1000
BLOCK_FLOATS = 4_000_000
MAX_WINDOW_STEPS = 200_000


@dataclass(frozen=True)
class Trajectory:
    dt: float
    samples: np.ndarray
    kind: str

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt


@dataclass(frozen=True)
class MCEstimate:
    """Ensemble envelope ``<cos phase>`` on a time grid with standard errors."""

    times: np.ndarray
    envelope: np.ndarray
    stderr: np.ndarray
    n_traj: int
    seed: int
    kind: str


@dataclass(frozen=True)
class RateFit:
    """Exponential decay rate fitted to an empirical envelope."""

    rate: float
    stderr: float
    times: np.ndarray
    envelope: np.ndarray
    envelope_stderr: np.ndarray


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for path ``index`` of an ensemble seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _n_samples(env: NoiseEnvironment, dt: float, t_max: float) -> int:
    if not dt > 0:
        raise DomainError("dt must be positive")
    if dt > env.tau_c / STEPS_PER_TAU * (1 + 1e-12):
        raise ResolutionError(
            f"dt = {dt:.3e} s is coarser than tau_c / {STEPS_PER_TAU} = {env.tau_c / STEPS_PER_TAU:.3e} s; "
            "reduce dt or increase the correlation time"
        )
    if not t_max > dt:
        raise DomainError("t_max must exceed dt")
    return int(math.ceil(t_max / dt - 1e-9)) + 1


def _ou_paths(env: NoiseEnvironment, dt: float, n: int, seed: int, indices) -> np.ndarray:
    rho = math.exp(-dt / env.tau_c)
    xi = np.stack([path_rng(seed, i).standard_normal(n) for i in indices])
    xi[:, 1:] *= math.sqrt(1.0 - rho * rho)
    # B_0 ~ N(0, sigma0^2); B_i = rho B_{i-1} + sigma0 sqrt(1 - rho^2) xi_i
    return env.sigma0 * lfilter([1.0], [1.0, -rho], xi, axis=1)


@lru_cache(maxsize=16)
def _smooth_factor(n: int, step: float) -> np.ndarray:
    """Low-rank square root of the unit squared-exponential covariance on ``n`` points spaced ``step`` (in tau_c)."""
    t = np.arange(n) * step
    cov = np.exp(-0.5 * (t[:, None] - t[None, :]) ** 2)
    vals, vecs = np.linalg.eigh(cov)
    keep = vals > vals[-1] * 1e-15
    return vecs[:, keep] * np.sqrt(vals[keep])


def _smooth_paths(env: NoiseEnvironment, dt: float, n: int, seed: int, indices) -> np.ndarray:
    factor = _smooth_factor(n, dt / env.tau_c)
    z = np.stack([path_rng(seed, i).standard_normal(factor.shape[1]) for i in indices])
    return env.sigma0 * (z @ factor.T)


_SAMPLERS = {"ou": _ou_paths, "smooth": _smooth_paths}


def _sample(kind, env, dt, t_max, seed, path_index):
    n = _n_samples(env, dt, t_max)
    samples = _SAMPLERS[kind](env, dt, n, seed, [path_index])[0]
    return Trajectory(dt, samples, kind)


def sample_ou(env: NoiseEnvironment, dt: float, t_max: float, seed: int, path_index: int = 0) -> Trajectory:
    """Stationary OU path with variance ``sigma0^2`` and correlation time ``tau_c``.

    Requires ``dt <= tau_c / 100``.
    """
    return _sample("ou", env, dt, t_max, seed, path_index)


def sample_smooth(env: NoiseEnvironment, dt: float, t_max: float, seed: int, path_index: int = 0) -> Trajectory:
    """Stationary squared-exponential Gaussian path (variance ``sigma0^2``, length ``tau_c``)."""
    return _sample("smooth", env, dt, t_max, seed, path_index)


def phase_weights(seq: PulseSequence, dt: float, n_samples: int) -> np.ndarray:
    """Node weights ``w`` with ``sum_i w_i B_i = integral_0^T f(t) B_lin(t) dt``.

    ``B_lin`` is the piecewise-linear interpolant of the samples and ``f`` the
    switching function. Cells containing a pulse are split at the exact pulse
    time, so a static or linear field is integrated without snapping error.
    """
    T = seq.total_time
    grid = np.arange(n_samples) * dt
    if T > grid[-1] * (1 + 1e-12):
        raise ResolutionError("sequence window extends beyond the sampled trajectory")
    T = min(T, grid[-1])
    pulses = np.asarray(seq.pulse_times)
    bps = np.union1d(np.concatenate((grid[grid < T], pulses[pulses < T])), [T])
    a, b = bps[:-1], bps[1:]
    cell = np.clip(np.searchsorted(grid, a, side="right") - 1, 0, n_samples - 2)
    sign = np.where(np.searchsorted(pulses, 0.5 * (a + b), side="right") % 2 == 0, 1.0, -1.0)
    length, mid = b - a, 0.5 * (a + b)
    w = np.zeros(n_samples)
    np.add.at(w, cell, sign * length * (grid[cell + 1] - mid) / dt)
    np.add.at(w, cell + 1, sign * length * (mid - grid[cell]) / dt)
    return w


def accumulated_phase(samples, dt: float, seq: PulseSequence, gamma: float = GAMMA_E):
    """Phase ``gamma * integral f B dt`` for one path or a stack of paths (last axis = time)."""
    samples = np.asarray(samples, dtype=float)
    return gamma * (samples @ phase_weights(seq, dt, samples.shape[-1]))


def synchronized_field(seq: PulseSequence, t, amplitude: float = 1.0, shape: str = "square"):
    """Field that flips sign with every pulse, so the probe sees ``|field|``.

    ``square`` is the telegraph signal ``+-amplitude``; ``sine`` is a half
    sine lobe between consecutive pulses (nodes on every pulse).
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(switching_function(seq, t))
    if shape == "square":
        return amplitude * f
    if shape == "sine":
        edges = np.concatenate(([0.0], seq.pulse_times, [seq.total_time]))
        seg = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(edges) - 2)
        lo, hi = edges[seg], edges[seg + 1]
        return amplitude * f * np.sin(np.pi * (t - lo) / (hi - lo))
    raise DomainError(f"unknown waveform shape {shape!r}")


@dataclass(frozen=True)
class BlockSums:
    """Per-block count, sum and centred sum of squares of ``cos(phase)``."""

    count: int
    s1: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_values(cls, c: np.ndarray) -> "BlockSums":
        mean = c.mean(axis=0)
        return cls(len(c), c.sum(axis=0), ((c - mean) ** 2).sum(axis=0))


def aggregate(blocks) -> tuple:
    """Combine per-block sums into the ensemble mean and its standard error.

    Block totals are combined with exactly rounded summation and the
    variance uses centred per-block sums (the parallel form of Welford's
    update), so the result does not depend on block order or partitioning
    beyond per-block rounding.
    """
    blocks = list(blocks)
    n = sum(b.count for b in blocks)
    if n < 2:
        raise DomainError("at least two trajectories are needed for a standard error")
    m = len(blocks[0].s1)
    mean = np.array([math.fsum(b.s1[j] for b in blocks) for j in range(m)]) / n
    m2 = np.array(
        [
            math.fsum(
                [b.m2[j] for b in blocks] + [b.count * (b.s1[j] / b.count - mean[j]) ** 2 for b in blocks]
            )
            for j in range(m)
        ]
    )
    var = np.maximum(m2, 0.0) / (n - 1)
    return mean, np.sqrt(var / n)


def mc_envelope(
    seq_family: Callable[[float], PulseSequence],
    env: NoiseEnvironment,
    kind: str,
    n_traj: int,
    t_grid,
    seed: int,
    *,
    gamma: float = GAMMA_E,
    dt: float | None = None,
    block_size: int | None = None,
    n_jobs: int = 1,
) -> MCEstimate:
    """Empirical envelope ``<cos(gamma integral f B dt)>`` for windows in ``t_grid``.

    ``seq_family(t)`` returns the sequence used for window length ``t``; each
    trajectory is shared by all windows (they all start at ``t = 0``).
    ``dt`` defaults to ``min(tau_c / 100, max(t_grid) / 1000)``.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown noise kind {kind!r}; expected one of {KINDS}")
    if n_traj < MIN_TRAJECTORIES:
        raise DomainError(f"n_traj must be at least {MIN_TRAJECTORIES}")
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(times < 0):
        raise DomainError("t_grid must be a non-empty 1-d array of non-negative times")
    t_max = float(times.max())
    if not t_max > 0:
        raise DomainError("t_grid needs a positive time")
    if dt is None:
        dt = min(env.tau_c / STEPS_PER_TAU, t_max / 1000.0)
    n = _n_samples(env, dt, t_max)
    W = np.zeros((times.size, n))
    for row, t in enumerate(times):
        if t > 0:
            W[row] = phase_weights(seq_family(float(t)), dt, n)
    W *= gamma

    if block_size is None:
        block_size = max(1, min(n_traj, BLOCK_FLOATS // n))
    starts = range(0, n_traj, block_size)
    sampler = _SAMPLERS[kind]

    def run(start):
        idx = range(start, min(start + block_size, n_traj))
        return BlockSums.from_values(np.cos(sampler(env, dt, n, seed, idx) @ W.T))

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            blocks = list(ex.map(run, starts))
    else:
        blocks = [run(s) for s in starts]
    mean, se = aggregate(blocks)
    return MCEstimate(times, mean, se, n_traj, seed, kind)


def fit_exponential_rate(times, envelope, stderr, min_points: int = 3, max_chi2: float = 10.0) -> RateFit:
    """Weighted straight-line fit of ``log envelope`` against time (with intercept).

    Raises :class:`RegimeError` when too few points are resolved or the
    decay is visibly non-exponential.
    """
    times, envelope, stderr = (np.asarray(x, dtype=float) for x in (times, envelope, stderr))
    if np.all(envelope == 1.0):
        return RateFit(0.0, 0.0, times, envelope, stderr)
    use = (times > 0) & (envelope > np.maximum(10.0 * stderr, 0.02))
    if use.sum() < min_points:
        raise RegimeError("too few resolved envelope points for an exponential fit")
    t, y = times[use], np.log(envelope[use])
    sy = np.maximum(stderr[use] / envelope[use], 1e-15)
    coef, cov = np.polyfit(t, y, 1, w=1.0 / sy, cov="unscaled")
    dof = use.sum() - 2
    if dof > 0:
        chi2 = float(np.sum(((y - np.polyval(coef, t)) / sy) ** 2)) / dof
        if chi2 > max_chi2:
            raise RegimeError(f"envelope is not exponential (reduced chi^2 = {chi2:.1f})")
    return RateFit(-float(coef[0]), float(math.sqrt(cov[0, 0])), times, envelope, stderr)


def mc_fast_field_rate(
    sigma_ext: float,
    tau_ext: float,
    seq: PulseSequence | None = None,
    gamma: float = GAMMA_E,
    n_traj: int = 100_000,
    seed: int = 0,
    *,
    n_points: int = 10,
    n_jobs: int = 1,
) -> RateFit:
    """Decay rate of the probe in a fast OU field, fitted from Monte Carlo.

    ``seq`` is a template stretched to each window (``None`` for free
    induction). Requires ``Theta_ext = 1 / (gamma sigma_ext tau_ext) > 5``.
    The window extends to roughly one e-fold of the expected decay, capped at
    ``MAX_WINDOW_STEPS`` grid steps.
    """
    if sigma_ext < 0 or not tau_ext > 0:
        raise DomainError("need sigma_ext >= 0 and tau_ext > 0")
    theta_ext = math.inf if sigma_ext == 0 else 1.0 / (gamma * sigma_ext * tau_ext)
    if not theta_ext > 5:
        raise RegimeError(f"fast-field fit needs Theta_ext > 5, got {theta_ext:.3g}")
    dt = tau_ext / STEPS_PER_TAU
    t_max = MAX_WINDOW_STEPS * dt
    if sigma_ext > 0:
        t_max = min(t_max, 2.0 / (gamma * sigma_ext) ** 2 / tau_ext)
    template = seq if seq is not None else free_induction(1.0)
    env = NoiseEnvironment(sigma0=max(sigma_ext, 1e-300), tau_c=tau_ext)
    times = np.linspace(t_max / n_points, t_max, n_points)
    est = mc_envelope(template.scaled, env, "ou", n_traj, times, seed, gamma=gamma, dt=dt, n_jobs=n_jobs)
    if sigma_ext == 0:
        return RateFit(0.0, 0.0, est.times, np.ones_like(est.times), np.zeros_like(est.times))
    return fit_exponential_rate(est.times, est.envelope, est.stderr)
