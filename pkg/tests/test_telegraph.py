import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsnoise.errors import LengthMismatch, ValidationError
from tlsnoise.geometry import QubitLayout, TlsConfiguration, voltage_kernel
from tlsnoise.spectra import lorentzian
from tlsnoise.telegraph import (
    TimeSeriesSpec,
    cross_periodogram,
    estimate_cpsd,
    estimate_from_config,
    estimate_psd,
    periodogram,
    synthesize_qubit_records,
    telegraph_states,
)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 400), dt=st.floats(1e-3, 10), seed=st.integers(0, 2**32 - 1))
def test_parseval(n, dt, seed):
    x = np.random.default_rng(seed).normal(0.3, 1.0, n)
    p = periodogram(x, dt)[0]
    df = 1.0 / (n * dt)
    assert p.sum() * df + x.mean() ** 2 == pytest.approx(np.mean(x * x), rel=1e-10)


def test_cross_periodogram_reduces_to_periodogram():
    x = np.random.default_rng(0).normal(size=257)
    assert np.allclose(cross_periodogram(x, x, 0.5).real, periodogram(x, 0.5)[0])
    assert np.allclose(cross_periodogram(x, x, 0.5).imag, 0.0)


def test_cross_periodogram_phase_convention():
    # b lags a by a quarter period at one bin: conj(Xa) Xb has phase -pi/2
    n, k = 64, 4
    t = np.arange(n)
    a = np.cos(2 * np.pi * k * t / n)
    b = np.cos(2 * np.pi * k * t / n - np.pi / 2)
    c = cross_periodogram(a, b, 1.0)
    assert np.angle(c[k - 1]) == pytest.approx(-np.pi / 2, abs=1e-9)


def test_telegraph_values_and_determinism():
    times = np.arange(5000) * 0.1
    s1 = telegraph_states(0.7, times, np.random.default_rng(3))
    s2 = telegraph_states(0.7, times, np.random.default_rng(3))
    assert np.array_equal(s1, s2)
    assert set(np.unique(s1)) <= {-1, 1}


def test_flip_count_matches_rate():
    rate, t_end = 0.5, 40_000.0
    times = np.linspace(0, t_end, 400_001)
    s = telegraph_states(rate, times, np.random.default_rng(11))
    changes = np.count_nonzero(np.diff(s))
    # a sample-to-sample change needs an odd number of flips in dt
    dt = times[1] - times[0]
    p_odd = (1 - math.exp(-2 * rate * dt)) / 2
    expected = (times.size - 1) * p_odd
    assert abs(changes - expected) < 5 * math.sqrt(expected)


def test_autocorrelation_decays_at_twice_the_rate():
    rate, dt = 0.05, 1.0
    spec = TimeSeriesSpec(200_000.0, dt)
    s = telegraph_states(rate, spec.times, np.random.default_rng(2)).astype(float)
    for lag in (5, 10, 20):
        r = np.mean(s[:-lag] * s[lag:])
        assert r == pytest.approx(math.exp(-2 * rate * lag * dt), abs=0.03)


def test_spec_validation_and_grid():
    with pytest.raises(ValidationError):
        TimeSeriesSpec(10.5, 1.0)
    with pytest.raises(ValidationError):
        TimeSeriesSpec(1.0, 1.0)
    with pytest.raises(ValidationError):
        TimeSeriesSpec(10.0, 1.0, n_realizations=0)
    spec = TimeSeriesSpec(8.0, 0.5)
    assert spec.n_samples == 16
    assert np.allclose(spec.frequencies, np.arange(1, 9) / 8.0)


def test_streams_do_not_depend_on_realization_count():
    cfg = TlsConfiguration.from_arrays([[0, 10, 72], [40, -20, 72]], [[1, 0, 0], [0, 0, 1]], 1.0, [0.1, 0.01])
    lay = QubitLayout.pair()
    one = synthesize_qubit_records(cfg, lay, "voltage", TimeSeriesSpec(500.0, 1.0, 1, 9))
    three = synthesize_qubit_records(cfg, lay, "voltage", TimeSeriesSpec(500.0, 1.0, 3, 9))
    assert np.array_equal(one[0], three[0])
    assert not np.array_equal(three[0], three[1])


def test_sites_share_telegraph_draws():
    cfg = TlsConfiguration.from_arrays([[0, 10, 72]], [[0, 0, 1]], 1.0, 0.1)
    rec = synthesize_qubit_records(cfg, QubitLayout.pair(), "voltage", TimeSeriesSpec(200.0, 1.0, 1, 1))[0]
    # a single TLS drives both sites through fixed gains, so the records are proportional
    assert np.allclose(rec[0] / rec[0][0], rec[1] / rec[1][0])


def test_estimated_psd_tracks_lorentzian():
    rate = 0.02
    cfg = TlsConfiguration.from_arrays([[0, 30, 72]], [[0, 0, 1]], 1.0, rate)
    lay = QubitLayout.pair()
    spec = TimeSeriesSpec(20_000.0, 1.0, 30, 4)
    est = estimate_from_config(cfg, lay, "voltage", spec)
    f = est.grid.values
    k = voltage_kernel(cfg.tls_list[0], lay.sites[0], cfg.epsilon_r)
    analytic = k * k * lorentzian(f, 1 / (2 * rate))
    edges = np.geomspace(1e-3, 0.1, 9)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (f >= lo) & (f < hi)
        assert est.site(0).apsd[sel].mean() == pytest.approx(analytic[sel].mean(), rel=0.15)


def test_estimate_shapes_and_mismatch():
    spec = TimeSeriesSpec(64.0, 1.0)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 64))
    e = estimate_psd(x, spec)
    assert e.apsd.shape == (32,) and e.n_realizations == 3
    c = estimate_cpsd(x, x, spec)
    assert np.allclose(c.strength, 1.0)
    with pytest.raises(LengthMismatch):
        estimate_psd(rng.normal(size=50), spec)
    with pytest.raises(LengthMismatch):
        estimate_cpsd(x, x[:2], spec)
