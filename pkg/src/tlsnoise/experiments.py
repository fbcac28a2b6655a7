"""Synthetic-measurement pipelines shared by the CLI and the validation suite.

A synthetic measurement runs the full forward path: telegraph simulation,
FFT spectral estimation averaged over realizations, and log re-binning into
the same :class:`~tlsnoise.inference.BinnedSpectrum` an ingested file
produces.  The per-bin sigma is the spread of the averaged spectrum inside
the bin, so more realizations give tighter acceptance bands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import LayerBox, Observable, OrientationClass, QubitLayout, TlsConfiguration, sample_configuration
from .errors import AllRejected
from .hypothesis import ModelHypothesis, geometric_counts, hypothesis_grid, log_lengths
from .inference import (
    Expectations,
    MeasurementSet,
    PhaseObservation,
    PosteriorTable,
    bayes_update,
    brier,
    expectations,
    sequential_update,
    sweep_likelihoods,
)
from .io import log_bin_edges, log_rebin
from .telegraph import TimeSeriesSpec, estimate_from_config

DEFAULT_SEPARATION_NM = 100.0
DEFAULT_HEIGHT_NM = 72.0
DEFAULT_HALF_WIDTH_NM = 150.0
DEFAULT_RATES_HZ = (1e-5, 1.0)
DEFAULT_EPSILON_R = 11.0
DEFAULT_DIPOLE_NM = 1.0


def default_layout() -> QubitLayout:
    return QubitLayout.pair(DEFAULT_SEPARATION_NM)


def default_layer() -> LayerBox:
    w = DEFAULT_HALF_WIDTH_NM
    return LayerBox((-w, w), (-w, w), (DEFAULT_HEIGHT_NM, DEFAULT_HEIGHT_NM))


@dataclass(frozen=True)
class SyntheticSettings:
    """How a synthetic measurement is recorded and binned."""

    n_realizations: int = 20
    n_samples: int = 20_000
    sample_interval: float = 1.0
    f_min: float = 1e-3
    f_max: float = 1e-1
    bins_per_decade: float = 10.0
    band_k: float = 3.0
    phase_min_strength: float = 0.3  # keep phase bins whose |normalized CPSD| exceeds this

    def time_spec(self, seed: int) -> TimeSeriesSpec:
        return TimeSeriesSpec(self.n_samples * self.sample_interval, self.sample_interval,
                              self.n_realizations, seed)


def observed_phases(est_pair, freqs: np.ndarray, settings: SyntheticSettings) -> tuple[PhaseObservation, ...]:
    """Snap bin-averaged cross spectra to 0 or pi; keep only clearly correlated bins."""
    edges = log_bin_edges(settings.f_min, settings.f_max, settings.bins_per_decade)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (freqs >= lo) & (freqs < hi) & (freqs >= settings.f_min) & (freqs <= settings.f_max)
        if sel.sum() < 2:
            continue
        c = est_pair.cpsd[sel].mean()
        strength = abs(c) / math.sqrt(est_pair.apsd_a[sel].mean() * est_pair.apsd_b[sel].mean())
        if strength < settings.phase_min_strength:
            continue
        center = float(np.exp(np.mean(np.log(freqs[sel]))))
        out.append(PhaseObservation(center, 0.0 if c.real >= 0 else math.pi))
    return tuple(out)


def synthetic_measurement(config: TlsConfiguration, layout: QubitLayout, seed: int,
                          settings: SyntheticSettings = SyntheticSettings(),
                          sites: Sequence[int] | None = None, with_phases: bool = False,
                          observable=Observable.VOLTAGE) -> MeasurementSet:
    sites = tuple(range(len(layout))) if sites is None else tuple(sites)
    pair = (sites[0], sites[1]) if with_phases else None
    spec = settings.time_spec(seed)
    est = estimate_from_config(config, layout, observable, spec, pairs=(pair,) if pair else ())
    f = est.grid.values
    apsd = {s: log_rebin(f, est.site(s).apsd, settings.bins_per_decade, settings.f_min, settings.f_max,
                         settings.band_k) for s in sites}
    phases = observed_phases(est.pair(*pair), f, settings) if pair else ()
    return MeasurementSet(layout, apsd, phases, observable, pair or (0, 1))


# ---------------------------------------------------------------------------
# Brier protocol: one dot, two dots, two samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BrierProtocol:
    """Mock experiment with a small discrete hypothesis set and one true dipole."""

    lengths: tuple[float, ...] = (0.01, 0.1, 1.0)  # nm, i.e. moments 10, 100, 1000 x 1e-3 e nm
    counts: tuple[int, ...] = (1, 10)
    true_count: int = 1
    true_length: float = 0.1
    orientation: OrientationClass = OrientationClass.FULLY_RANDOM
    layer: LayerBox = LayerBox((-100.0, 100.0), (-150.0, 150.0), (50.0, 75.0))
    separation: float = 100.0
    rate_interval: tuple[float, float] = DEFAULT_RATES_HZ
    n_mc: int = 20000
    settings: SyntheticSettings = SyntheticSettings()

    def hypotheses(self) -> list[ModelHypothesis]:
        return hypothesis_grid(self.counts, self.lengths, (self.orientation,), self.layer, self.rate_interval)

    def truth_index(self) -> int:
        for j, h in enumerate(self.hypotheses()):
            if h.n_tls == self.true_count and math.isclose(h.dipole_length, self.true_length):
                return j
        raise ValueError("true hypothesis is not in the grid")


@dataclass(frozen=True)
class BrierResult:
    seed: int
    one_dot: float
    two_dots: float
    two_samples: float
    tables: dict = field(default_factory=dict, compare=False, repr=False)


def _sample_seed(seed: int, sample: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(1000 + sample,))


def run_brier_protocol(protocol: BrierProtocol, seed: int) -> BrierResult:
    hyps = protocol.hypotheses()
    truth = protocol.truth_index()
    layout = QubitLayout.pair(protocol.separation)
    cfgs = [sample_configuration(hyps[truth], _sample_seed(seed, k)) for k in range(2)]
    meas = [synthetic_measurement(c, layout, seed + 7919 * k, protocol.settings) for k, c in enumerate(cfgs)]
    one_a = meas[0].restricted_to([0])
    one_b = meas[1].restricted_to([0])
    lik_1 = sweep_likelihoods(hyps, one_a, protocol.n_mc, seed)
    lik_2 = sweep_likelihoods(hyps, meas[0], protocol.n_mc, seed)
    lik_b = sweep_likelihoods(hyps, one_b, protocol.n_mc, seed + 1)
    tables = {}
    scores = {}
    for name, build in (
        ("one_dot", lambda: bayes_update(hyps, lik_1, protocol.n_mc, seed)),
        ("two_dots", lambda: bayes_update(hyps, lik_2, protocol.n_mc, seed)),
        ("two_samples", lambda: sequential_update(hyps, [lik_1, lik_b], protocol.n_mc, seed)),
    ):
        try:
            tables[name] = build()
            scores[name] = brier(tables[name], truth)
        except AllRejected:  # no information: score as the uniform prior would
            tables[name] = None
            k = len(hyps)
            scores[name] = (1 - 1 / k) ** 2 + (k - 1) / k**2
    return BrierResult(seed, scores["one_dot"], scores["two_dots"], scores["two_samples"], tables)


# ---------------------------------------------------------------------------
# hypothesis sweeps on synthetic data
# ---------------------------------------------------------------------------

def sweep_posterior(hypotheses: Sequence[ModelHypothesis], measurement: MeasurementSet, n_mc: int,
                    seed: int) -> PosteriorTable:
    lik = sweep_likelihoods(hypotheses, measurement, n_mc, seed)
    return bayes_update(hypotheses, lik, n_mc, seed)


def ridge_crest(table: PosteriorTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Posterior-weighted geometric mean of length for every count row that has mass.

    Returns (counts, crest lengths, row masses).
    """
    ex = expectations(table)
    counts, lengths = np.array(ex.counts, dtype=float), np.log(np.array(ex.lengths))
    rows = ex.marginal.sum(axis=1)
    keep = rows > 0
    crest = np.exp(ex.marginal[keep] @ lengths / rows[keep])
    return counts[keep], crest, rows[keep]


def ridge_slope(table: PosteriorTable) -> float:
    """Log-log slope of the crest, each row weighted by its posterior mass."""
    n, ell, mass = ridge_crest(table)
    if n.size < 2:
        return math.nan
    return float(np.polyfit(np.log(n), np.log(ell), 1, w=np.sqrt(mass))[0])


# ---------------------------------------------------------------------------
# phase-filter experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseFilterProtocol:
    """Compare APSD-only inference with APSD plus CPSD-phase inference on the same synthetic data.

    The true configuration is redrawn (up to ``max_redraws`` times) until at
    least ``min_pi_fraction`` of the retained phase bins show anticorrelation,
    the regime in which phase information is informative: correlated (zero)
    phases are what almost every many-TLS configuration produces anyway.
    """

    true_count: int = 9
    true_length: float = 1.0
    orientation: OrientationClass = OrientationClass.HORIZONTAL_RANDOM
    layer: LayerBox = field(default_factory=default_layer)
    counts: tuple[int, ...] = tuple(geometric_counts())
    lengths: tuple[float, ...] = tuple(log_lengths(1.0))
    n_mc: int = 5000
    min_pi_fraction: float = 0.25
    max_redraws: int = 50
    settings: SyntheticSettings = SyntheticSettings()

    def hypotheses(self) -> list[ModelHypothesis]:
        return hypothesis_grid(self.counts, self.lengths, (self.orientation,), self.layer)


@dataclass(frozen=True)
class PhaseFilterResult:
    seed: int
    redraws: int
    phases: tuple[PhaseObservation, ...]
    apsd_only: Expectations | None
    with_phases: Expectations | None

    @property
    def shifted_to_fewer_larger(self) -> bool:
        a, b = self.apsd_only, self.with_phases
        if a is None or b is None:
            return False
        return b.mean_n_tls < a.mean_n_tls and b.mean_ell > a.mean_ell


def run_phase_filter(protocol: PhaseFilterProtocol, seed: int) -> PhaseFilterResult:
    truth = ModelHypothesis(protocol.true_count, protocol.true_length, protocol.orientation, protocol.layer)
    layout = default_layout()
    for k in range(protocol.max_redraws):
        cfg = sample_configuration(truth, np.random.SeedSequence(seed, spawn_key=(k,)))
        meas = synthetic_measurement(cfg, layout, seed, protocol.settings, with_phases=True)
        n_pi = sum(not p.is_zero for p in meas.phases)
        if meas.phases and n_pi >= protocol.min_pi_fraction * len(meas.phases):
            break
    hyps = protocol.hypotheses()
    out = []
    for m in (meas.without_phases(), meas):
        try:
            out.append(expectations(sweep_posterior(hyps, m, protocol.n_mc, seed)))
        except AllRejected:
            out.append(None)
    return PhaseFilterResult(seed, k, meas.phases, out[0], out[1])
