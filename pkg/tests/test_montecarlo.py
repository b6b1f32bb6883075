import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uddmag.bath import GAMMA_E, NoiseEnvironment, bath_from_concentration
from uddmag.dephasing import envelope, udd_model
from uddmag.errors import DomainError, RegimeError, ResolutionError
from uddmag.montecarlo import (
    BlockSums,
    accumulated_phase,
    aggregate,
    fit_exponential_rate,
    mc_envelope,
    mc_fast_field_rate,
    path_rng,
    phase_weights,
    sample_ou,
    sample_smooth,
    synchronized_field,
)
from uddmag.sequences import PulseSequence, hahn, lambda_factor, udd

ENV = bath_from_concentration(0.011)
UNIT = NoiseEnvironment(sigma0=1.0, tau_c=1.0)


def _stats(kind, n_paths=3000, n=301, dt=0.01):
    samples = np.stack([(sample_ou if kind == "ou" else sample_smooth)(UNIT, dt, (n - 1) * dt, 7, i).samples for i in range(n_paths)])
    return samples


def test_ou_marginals():
    x = _stats("ou")
    var = x[:, 0].var()
    assert abs(var - 1.0) < 3 * math.sqrt(2.0 / len(x))
    # correlation exp(-lag / tau_c)
    corr = np.mean(x[:, 0] * x[:, 100])
    assert corr == pytest.approx(math.exp(-1), abs=4 / math.sqrt(len(x)))


def test_smooth_marginals():
    x = _stats("smooth")
    assert abs(x[:, 150].var() - 1.0) < 3 * math.sqrt(2.0 / len(x))
    corr = np.mean(x[:, 0] * x[:, 100])
    assert corr == pytest.approx(math.exp(-0.5), abs=4 / math.sqrt(len(x)))
    # slope spread sigma0 / tau_c
    slope = (x[:, 151] - x[:, 149]) / 0.02
    assert slope.std() == pytest.approx(1.0, rel=0.05)


def test_sampler_preconditions():
    with pytest.raises(ResolutionError):
        sample_ou(UNIT, 0.02, 1.0, 0)
    with pytest.raises(DomainError):
        sample_smooth(UNIT, 0.01, 0.005, 0)
    traj = sample_ou(UNIT, 0.01, 1.0, 0)
    assert len(traj.samples) == 101
    assert traj.times[-1] == pytest.approx(1.0)


def test_static_and_linear_fields():
    seq = udd(3, 0.73)
    dt = 0.73 / 97
    n = 98
    t = np.arange(n) * dt
    assert accumulated_phase(np.full(n, 2.0), dt, seq, 1.0) == pytest.approx(2.0 * 0.73 * lambda_factor(seq, 0), abs=1e-14)
    lin = accumulated_phase(t, dt, seq, 1.0)
    assert lin == pytest.approx(0.5 * 0.73**2 * lambda_factor(seq, 1), abs=1e-14)
    with pytest.raises(ResolutionError):
        phase_weights(udd(3, 2.0), dt, n)


def test_synchronized_fields():
    seq = udd(4, 1.0)
    n = 20001
    dt = 1.0 / (n - 1)
    t = np.arange(n) * dt
    sq = synchronized_field(seq, t, 3.0)
    assert accumulated_phase(sq, dt, seq, 1.0) == pytest.approx(3.0, rel=1e-3)
    sine = synchronized_field(seq, t, 1.0, "sine")
    assert accumulated_phase(sine, dt, seq, 1.0) == pytest.approx(2 / math.pi, rel=1e-6)
    with pytest.raises(DomainError):
        synchronized_field(seq, t, 1.0, "triangle")


def test_envelope_basics_and_hahn_agreement():
    times = np.array([0.0, 2e-4, 4e-4, 6e-4])
    est = mc_envelope(hahn, ENV, "smooth", 4000, times, seed=11)
    assert est.envelope[0] == 1.0 and est.stderr[0] == 0.0
    assert np.all(np.abs(est.envelope) <= 1 + 3 * est.stderr)
    ref = envelope(udd_model(1, ENV), times)
    assert np.all(np.abs(est.envelope - ref) <= np.maximum(4 * est.stderr, 0.02))


def test_envelope_partition_invariance():
    times = np.array([1e-4, 3e-4])
    a = mc_envelope(hahn, ENV, "ou", 1500, times, seed=5)
    b = mc_envelope(hahn, ENV, "ou", 1500, times, seed=5, block_size=77, n_jobs=3)
    assert np.allclose(a.envelope, b.envelope, rtol=1e-12, atol=1e-15)
    c = mc_envelope(hahn, ENV, "ou", 1500, times, seed=5)
    assert np.array_equal(a.envelope, c.envelope) and np.array_equal(a.stderr, c.stderr)


def test_stderr_convergence():
    times = np.array([3e-4])
    a = mc_envelope(hahn, ENV, "smooth", 2000, times, seed=1)
    b = mc_envelope(hahn, ENV, "smooth", 4000, times, seed=2)
    assert b.stderr[0] / a.stderr[0] == pytest.approx(1 / math.sqrt(2), rel=0.1)


def test_envelope_validation():
    with pytest.raises(DomainError):
        mc_envelope(hahn, ENV, "pink", 2000, [1e-4], 0)
    with pytest.raises(DomainError):
        mc_envelope(hahn, ENV, "ou", 10, [1e-4], 0)
    with pytest.raises(DomainError):
        mc_envelope(hahn, ENV, "ou", 2000, [0.0], 0)
    with pytest.raises(ResolutionError):
        mc_envelope(hahn, ENV, "ou", 2000, [1e-4], 0, dt=ENV.tau_c)


def test_fit_exponential_rate():
    t = np.linspace(0, 1, 11)
    fit = fit_exponential_rate(t, np.exp(-2.5 * t), np.full(11, 1e-4))
    assert fit.rate == pytest.approx(2.5, rel=1e-10)
    assert fit_exponential_rate(t, np.ones(11), np.zeros(11)).rate == 0.0
    with pytest.raises(RegimeError):
        fit_exponential_rate(t, np.exp(-50 * t), np.full(11, 1e-2))
    with pytest.raises(RegimeError):
        fit_exponential_rate(t, np.exp(-2.0 * t**2), np.full(11, 1e-5))


def test_fast_field_guards():
    with pytest.raises(RegimeError):
        mc_fast_field_rate(1.0 / (GAMMA_E * 1e-6 * 2.0), 1e-6, n_traj=1000)
    with pytest.raises(DomainError):
        mc_fast_field_rate(1e-7, 0.0)
    assert mc_fast_field_rate(0.0, 1e-6, n_traj=1000, n_points=3).rate == 0.0


def test_fast_field_small_run():
    sigma = 1.0 / (GAMMA_E * 1e-6 * 20.0)
    fit = mc_fast_field_rate(sigma, 1e-6, n_traj=1000, seed=3, n_points=6)
    exact_ou = GAMMA_E**2 * sigma**2 * 1e-6
    assert fit.rate == pytest.approx(exact_ou, abs=5 * fit.stderr + 0.1 * exact_ou)


@given(st.integers(min_value=0, max_value=2**63), st.integers(min_value=0, max_value=10**6))
def test_seeded_determinism(seed, index):
    a = sample_ou(UNIT, 0.01, 0.05, seed, index).samples
    b = sample_ou(UNIT, 0.01, 0.05, seed, index).samples
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_ou(UNIT, 0.01, 0.05, seed, index + 1).samples)


@given(st.integers(min_value=0, max_value=2**32), st.lists(st.integers(1, 50), min_size=1, max_size=8))
def test_aggregation_partition(seed, cuts):
    rng = path_rng(seed, 0)
    c = np.cos(rng.normal(size=(sum(cuts) + 2, 3)) * 3)
    serial = aggregate([BlockSums.from_values(c)])
    edges = np.cumsum([0, *cuts, 2])
    parts = [c[a:b] for a, b in zip(edges[:-1], edges[1:])]
    blocks = [BlockSums.from_values(p) for p in parts]
    shuffled = aggregate(blocks[::-1])
    for x, y in zip(serial, shuffled):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-15)


@given(
    st.lists(st.floats(min_value=0.01, max_value=0.99), max_size=6, unique=True),
    st.integers(min_value=20, max_value=400),
    st.floats(-2.0, 2.0),
    st.floats(-2.0, 2.0),
)
def test_linear_field_exact(xs, n, b0, b1):
    xs = sorted(xs)
    xs = [x for i, x in enumerate(xs) if i == 0 or x - xs[i - 1] > 1e-6]
    seq = PulseSequence(1.0, tuple(xs))
    dt = 1.0 / (n - 1)
    t = np.arange(n) * dt
    phase = accumulated_phase(b0 + b1 * t, dt, seq, 1.0)
    assert phase == pytest.approx(b0 * lambda_factor(seq, 0) + 0.5 * b1 * lambda_factor(seq, 1), abs=1e-12)
