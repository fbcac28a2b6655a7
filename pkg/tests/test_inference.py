import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import TOY_LAYOUT, toy_exact_likelihood, toy_hypothesis, toy_measurement
from tlsnoise.errors import AllRejected, GridCoverage, ValidationError
from tlsnoise.geometry import LayerBox, OrientationClass, QubitLayout, TlsConfiguration
from tlsnoise.hypothesis import ModelHypothesis, geometric_counts, hypothesis_grid, log_lengths
from tlsnoise.inference import (
    BinnedSpectrum,
    MCLikelihood,
    MeasurementSet,
    PhaseObservation,
    PosteriorTable,
    ScanFamily,
    band_accept,
    bayes_update,
    brier,
    cost,
    expectations,
    mc_likelihood,
    phase_accept,
    sequential_update,
    sweep_likelihoods,
    underdetermination_scan,
)
from tlsnoise.spectra import FrequencyGrid, SpectrumSeries, analytic_cpsd

LAYER = LayerBox((-150, 150), (-150, 150), (72, 72))
LAYOUT = QubitLayout.pair(100)


def series(f, v):
    return SpectrumSeries(FrequencyGrid(f), np.asarray(v, dtype=float))


# ---------------------------------------------------------------- cost

F4 = np.geomspace(1e-4, 1.0, 401)


def test_cost_zero_for_identical_spectra():
    s = series(F4, 1.0 / F4)
    assert cost(s, s, 0.1 / F4, 1e-4, 1.0) == pytest.approx(0.0, abs=1e-20)


def test_cost_one_for_one_sigma_offset():
    m = series(F4, 1.0 / F4)
    c = series(F4, 1.1 / F4)
    assert cost(c, m, 0.1 / F4, 1e-4, 1.0) == pytest.approx(1.0, rel=1e-12)


def test_cost_two_sigma_on_one_decade():
    # deviation 2 sigma on exactly one of four decades: (1/4) * 4 = 1
    f = np.geomspace(1e-4, 1.0, 4001)
    m = series(f, np.ones_like(f))
    dev = np.where(f < 1e-3 * (1 + 1e-12), 2.0, 0.0)
    c = series(f, 1.0 + dev)
    # only the straddling trapezoid interval blurs the step
    assert cost(c, m, np.ones_like(f), 1e-4, 1.0) == pytest.approx(1.0, abs=4 * 4 / 4000)


def test_cost_grid_coverage():
    s = series(F4, 1.0 / F4)
    with pytest.raises(GridCoverage):
        cost(s, s, 0.1 / F4, 1e-5, 1.0)
    with pytest.raises(ValidationError):
        cost(s, s, 0.1 / F4, 1.0, 1e-2)


# ---------------------------------------------------------------- band / phase filters

def test_band_accept_examples():
    f = np.array([1e-3, 1e-2, 1e-1])
    b = BinnedSpectrum(f, [5.0, 3.0, 1.0], [1.0, 0.5, 0.1], 3.0)
    assert band_accept(series(f, b.mean), b)
    assert band_accept(series(f, [8.0, 1.5, 1.3]), b)
    assert not band_accept(series(f, [8.0, 1.5, 1.3 + 1e-9]), b)
    assert band_accept(series(f, [8.0, 1.5, 1.3 + 1e-9]), b.with_band(3.1))


@settings(max_examples=200, deadline=None)
@given(k=st.floats(0, 10), dk=st.floats(0, 10), vals=st.lists(st.floats(0, 20), min_size=3, max_size=3))
def test_band_accept_monotone_in_k(k, dk, vals):
    f = np.array([1e-3, 1e-2, 1e-1])
    b = BinnedSpectrum(f, [1.0, 2.0, 3.0], [1.0, 1.0, 1.0], k)
    c = series(f, vals)
    if band_accept(c, b):
        assert band_accept(c, b.with_band(k + dk))


def test_binned_spectrum_validation():
    with pytest.raises(ValidationError):
        BinnedSpectrum([1.0, 2.0], [1.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValidationError):
        BinnedSpectrum([2.0, 1.0], [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValidationError):
        BinnedSpectrum([1.0], [1.0, 2.0], [1.0])
    with pytest.raises(ValidationError):
        PhaseObservation(1e-3, 1.0)


def _single(orient, x=0.0, y=30.0):
    return TlsConfiguration.from_arrays([[x, y, 72]], [orient], 1.0, 0.01)


def test_phase_accept_examples():
    grid = FrequencyGrid([1e-3, 1e-2])
    c = analytic_cpsd(_single([1, 0, 0]), LAYOUT, 0, 1, "voltage", grid)  # anticorrelated
    assert phase_accept(c, [])
    assert phase_accept(c, [PhaseObservation(1e-2, math.pi)])
    assert not phase_accept(c, [PhaseObservation(1e-3, math.pi), PhaseObservation(1e-2, 0.0)])
    with pytest.raises(ValidationError):
        phase_accept(c, [PhaseObservation(5e-3, 0.0)])


def test_vertical_dipoles_never_match_observed_pi():
    hyp = ModelHypothesis(5, 1.0, "ver-z", LAYER)
    f = np.array([1e-3, 1e-2])
    apsd = {0: BinnedSpectrum(f, [0.0, 0.0], [np.inf, np.inf])}
    meas = MeasurementSet(LAYOUT, apsd, (PhaseObservation(1e-2, math.pi),))
    assert mc_likelihood(hyp, meas, 3000, 4).n_success == 0
    assert mc_likelihood(hyp, meas.without_phases(), 3000, 4).n_success == 3000


# ---------------------------------------------------------------- Monte-Carlo likelihood

def _measurement(mean, sigma, k=3.0):
    f = np.array([1e-3, 1e-2, 1e-1])
    b = BinnedSpectrum(f, np.full(3, mean), np.full(3, sigma), k)
    return MeasurementSet(LAYOUT, {0: b, 1: b})


def test_infinite_bands_accept_everything():
    hyp = ModelHypothesis(4, 1.0, "fully-random", LAYER)
    r = mc_likelihood(hyp, _measurement(0.0, np.inf), 500, 1)
    assert r.likelihood == 1.0 and r.n_success == 500


def test_unreachable_bands_reject_everything():
    hyp = ModelHypothesis(4, 1.0, "fully-random", LAYER)
    r = mc_likelihood(hyp, _measurement(1e-300, 1e-310), 500, 1)
    assert r.likelihood == 0.0
    assert MCLikelihood(0, 500, laplace=True).likelihood == pytest.approx(1 / 502)


@pytest.mark.parametrize("n,ell", [(1, 1.4), (2, 1.0), (2, 1.4), (3, 0.7), (3, 1.0), (3, 1.4)])
def test_toy_space_matches_enumeration(n, ell):
    meas = toy_measurement(rel_sigma=0.1)
    exact = toy_exact_likelihood(n, meas, ell)
    r = mc_likelihood(toy_hypothesis(n, ell), meas, 10_000, 31 * n)
    se = math.sqrt(exact * (1 - exact) / r.n_mc)
    assert abs(r.likelihood - exact) <= max(3 * se, 1e-12)


def test_likelihood_is_deterministic_and_chunk_independent():
    meas = toy_measurement(rel_sigma=0.1)
    hyp = toy_hypothesis(3, 1.0)
    a = mc_likelihood(hyp, meas, 2000, 9)
    b = mc_likelihood(hyp, meas, 2000, 9)
    assert a == b


def test_likelihood_monotone_in_band_multiplier():
    meas = toy_measurement(rel_sigma=0.05, k=1.0)
    hyp = toy_hypothesis(3, 1.0)
    values = [mc_likelihood(hyp, meas.with_band(k), 3000, 2).n_success for k in (1.0, 2.0, 4.0, 8.0)]
    assert values == sorted(values)


def test_n_mc_validation():
    with pytest.raises(ValidationError):
        mc_likelihood(toy_hypothesis(1), toy_measurement(), 0, 1)


# ---------------------------------------------------------------- Bayes updates

def two_hyps():
    return hypothesis_grid([1, 10], [1.0], ["fully-random"], LAYER)


def test_bayes_arithmetic():
    t = bayes_update(two_hyps(), [0.2, 0.6])
    assert np.allclose(t.posteriors, [0.25, 0.75], rtol=0, atol=1e-15)
    assert np.allclose(bayes_update(two_hyps(), [0.0, 0.3]).posteriors, [0.0, 1.0])
    assert np.allclose(bayes_update(two_hyps(), [0.4, 0.4]).posteriors, [0.5, 0.5])


def test_all_rejected():
    with pytest.raises(AllRejected):
        bayes_update(two_hyps(), [0.0, 0.0])
    with pytest.raises(ValidationError):
        bayes_update(two_hyps(), [0.1])


@settings(max_examples=200, deadline=None)
@given(lik=st.lists(st.floats(0, 1), min_size=6, max_size=6), scale=st.floats(1e-3, 1e3))
def test_posterior_normalized_and_scale_invariant(lik, scale):
    hyps = hypothesis_grid([1, 10], [0.1, 1.0, 10.0], ["fully-random"], LAYER)
    if sum(lik) == 0:
        return
    p = bayes_update(hyps, lik).posteriors
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    q = bayes_update(hyps, [v * scale for v in lik]).posteriors
    assert np.allclose(p, q, rtol=1e-9, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(sets=st.lists(st.lists(st.floats(0.01, 1), min_size=6, max_size=6), min_size=1, max_size=4),
       perm_seed=st.integers(0, 1000))
def test_sequential_update_is_order_independent(sets, perm_seed):
    hyps = hypothesis_grid([1, 10], [0.1, 1.0, 10.0], ["fully-random"], LAYER)
    a = sequential_update(hyps, sets).posteriors
    order = np.random.default_rng(perm_seed).permutation(len(sets))
    b = sequential_update(hyps, [sets[i] for i in order]).posteriors
    assert np.allclose(a, b, rtol=0, atol=1e-12)
    if len(sets) == 1:
        assert np.array_equal(a, bayes_update(hyps, sets[0]).posteriors)


# ---------------------------------------------------------------- expectations and Brier

def test_expectation_examples():
    t = bayes_update(two_hyps(), [0.5, 0.5])
    assert expectations(t).mean_n_tls == 5.5
    hyps = hypothesis_grid([3, 7], [0.2, 2.0], ["fully-random"], LAYER)
    point = expectations(bayes_update(hyps, [0, 0, 1, 0]))
    assert point.mean_n_tls == 7 and point.mean_ell == 0.2
    assert point.marginal.tolist() == [[0, 0], [1, 0]]


@settings(max_examples=200, deadline=None)
@given(lik=st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 1)), min_size=16, max_size=16).filter(lambda v: sum(v) > 0))
def test_law_of_total_expectation(lik):
    hyps = hypothesis_grid([1, 10], [0.1, 1.0], list(OrientationClass)[:4], LAYER)
    ex = expectations(bayes_update(hyps, lik))
    n = sum(c["probability"] * c.get("mean_n_tls", 0.0) for c in ex.by_orientation.values())
    ell = sum(c["probability"] * c.get("mean_ell", 0.0) for c in ex.by_orientation.values())
    assert n == pytest.approx(ex.mean_n_tls, abs=1e-12)
    assert ell == pytest.approx(ex.mean_ell, abs=1e-12)
    assert ex.marginal.sum() == pytest.approx(1.0, abs=1e-12)


def test_brier_examples():
    assert brier([0, 0, 1, 0, 0, 0], 2) == 0.0
    assert brier(np.full(6, 1 / 6), 0) == pytest.approx(5 / 6, rel=1e-15)
    assert brier([1, 0, 0], 2) == 2.0
    with pytest.raises(ValidationError):
        brier([1.0], 3)


@settings(max_examples=200, deadline=None)
@given(w=st.lists(st.floats(0, 1), min_size=2, max_size=12).filter(lambda v: sum(v) > 0), data=st.data())
def test_brier_bounds(w, data):
    p = np.array(w) / sum(w)
    truth = data.draw(st.integers(0, len(w) - 1))
    assert 0.0 <= brier(p, truth) <= 2.0 + 1e-12


# ---------------------------------------------------------------- serialization and sweeps

def test_posterior_table_round_trip():
    hyps = hypothesis_grid(geometric_counts()[:3], log_lengths(1.0)[:2], ["hor-x"], LAYER)
    t = bayes_update(hyps, [0.1, 0.2, 0.0, 0.4, 0.05, 0.25], n_mc=100, rng_seed=7)
    back = PosteriorTable.from_dict(json.loads(t.to_json()))
    assert back == t
    lines = t.to_csv().splitlines()
    assert lines[0] == "n_tls,ell_nm,orientation,likelihood,posterior"
    assert len(lines) == 7
    assert any("swept hypothesis set" in w for w in t.warnings)


def test_sweep_is_seed_deterministic_and_seed_sensitive():
    hyps = [toy_hypothesis(n, 1.0) for n in (1, 2, 3)]
    meas = toy_measurement(rel_sigma=0.1)
    a = sweep_likelihoods(hyps, meas, 500, 3)
    assert a == sweep_likelihoods(hyps, meas, 500, 3)
    assert a != sweep_likelihoods(hyps, meas, 500, 4)


def test_restricted_measurement_drops_phases():
    f = np.array([1e-3])
    b = BinnedSpectrum(f, [1.0], [1.0])
    m = MeasurementSet(TOY_LAYOUT, {0: b, 1: b}, (PhaseObservation(1e-3, 0.0),))
    r = m.restricted_to([0])
    assert list(r.apsd) == [0] and r.phases == ()
    with pytest.raises(ValidationError):
        MeasurementSet(TOY_LAYOUT, {})
    with pytest.raises(ValidationError):
        MeasurementSet(TOY_LAYOUT, {2: b})


# ---------------------------------------------------------------- underdetermination

def test_scan_finds_true_point():
    truth = TlsConfiguration.from_arrays([[20.0, -35.0, 72.0]], [[0, 0, 1]], 1.0, 0.01)
    fam = ScanFamily(72.0, (-100, 100), (-100, 100), 41, 41)
    pts = underdetermination_scan(truth, LAYOUT, fam)
    best = min(pts, key=lambda p: p.cost)
    assert (best.x, best.y) == (20.0, -35.0) and best.cost == pytest.approx(0.0, abs=1e-20)


def test_scan_wrong_orientation_still_finds_solutions():
    truth = TlsConfiguration.from_arrays([[0.0, 120.0, 72.0]], [[0, 0, 1]], 1.0, 0.01)
    fam = ScanFamily(72.0, (-200, 200), (-200, 200), 81, 81, ScanFamily.horizontal(36),
                     tuple(np.geomspace(0.25, 4, 9)))
    pts = underdetermination_scan(truth, LAYOUT, fam)
    assert pts
    assert all(abs(p.orientation[2]) == 0.0 for p in pts)


def test_scan_tenth_magnitude_still_finds_solutions():
    # a tenth of the moment must sit closer to the sites, so candidates live in a lower plane
    truth = TlsConfiguration.from_arrays([[0.0, 120.0, 72.0]], [[1, 0, 0]], 1.0, 0.01)
    fam = ScanFamily(30.0, (-200, 200), (-200, 200), 81, 81, ScanFamily.sphere(12, 24), (0.1,))
    pts = underdetermination_scan(truth, LAYOUT, fam)
    assert pts
    assert all(p.moment == 0.1 for p in pts)
