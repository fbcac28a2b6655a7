"""Monte-Carlo Bayesian inference over TLS model hypotheses.

A hypothesis fixes the TLS count, dipole length and orientation class; its
likelihood for a measurement is estimated as the fraction of configurations
drawn from the hypothesis prior whose analytic spectra fall inside every
measured acceptance band (and match every observed cross-spectrum phase).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AllRejected, GridCoverage, ValidationError
from .geometry import (
    Observable,
    OrientationClass,
    QubitLayout,
    TlsConfiguration,
    draw_configurations,
    observable_kernels,
)
from .hypothesis import ModelHypothesis
from .spectra import CrossSpectrum, SpectrumSeries, is_zero_phase, lorentzian, spectra_from_kernels

COMPLETENESS_WARNING = (
    "Posterior probabilities are relative to the swept hypothesis set only; "
    "configurations outside it are not represented and can make these probabilities overconfident."
)


# ---------------------------------------------------------------------------
# measurement types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinnedSpectrum:
    f_center: np.ndarray
    mean: np.ndarray
    sigma: np.ndarray
    band_multiplier: float = 3.0

    def __post_init__(self):
        f = np.asarray(self.f_center, dtype=float).ravel()
        m = np.asarray(self.mean, dtype=float).ravel()
        s = np.asarray(self.sigma, dtype=float).ravel()
        if not (f.shape == m.shape == s.shape) or f.size == 0:
            raise ValidationError("bin arrays must be non-empty and of equal length")
        if np.any(s <= 0):
            raise ValidationError("bin sigma must be positive")
        if np.any(np.diff(f) <= 0) or np.any(f <= 0):
            raise ValidationError("bin centers must be positive and increasing")
        if self.band_multiplier < 0:
            raise ValidationError("band multiplier must be non-negative")
        for name, v in (("f_center", f), ("mean", m), ("sigma", s)):
            object.__setattr__(self, name, v)

    def __len__(self) -> int:
        return self.f_center.size

    @property
    def lower(self) -> np.ndarray:
        return self.mean - self.band_multiplier * self.sigma

    @property
    def upper(self) -> np.ndarray:
        return self.mean + self.band_multiplier * self.sigma

    def with_band(self, k: float) -> "BinnedSpectrum":
        return BinnedSpectrum(self.f_center, self.mean, self.sigma, k)


@dataclass(frozen=True)
class PhaseObservation:
    f_center: float
    phase: float  # 0 or pi

    def __post_init__(self):
        if not (self.phase == 0.0 or abs(self.phase - math.pi) < 1e-12):
            raise ValidationError(f"observed phase must be 0 or pi, got {self.phase}")

    @property
    def is_zero(self) -> bool:
        return self.phase == 0.0


@dataclass(frozen=True)
class MeasurementSet:
    layout: QubitLayout
    apsd: dict[int, BinnedSpectrum]
    phases: tuple[PhaseObservation, ...] = ()
    observable: Observable = Observable.VOLTAGE
    phase_pair: tuple[int, int] = (0, 1)

    def __post_init__(self):
        if not self.apsd:
            raise ValidationError("a measurement needs at least one auto-spectrum")
        for s in self.apsd:
            if not 0 <= s < len(self.layout):
                raise ValidationError(f"site {s} not in layout")
        object.__setattr__(self, "observable", Observable.parse(self.observable))
        object.__setattr__(self, "phases", tuple(self.phases))
        if self.phases and len(self.layout) < 2:
            raise ValidationError("phase observations need two sites")

    def with_band(self, k: float) -> "MeasurementSet":
        return MeasurementSet(self.layout, {s: b.with_band(k) for s, b in self.apsd.items()},
                              self.phases, self.observable, self.phase_pair)

    def without_phases(self) -> "MeasurementSet":
        return MeasurementSet(self.layout, self.apsd, (), self.observable, self.phase_pair)

    def restricted_to(self, sites: Iterable[int]) -> "MeasurementSet":
        sites = set(sites)
        return MeasurementSet(self.layout, {s: b for s, b in self.apsd.items() if s in sites},
                              (), self.observable, self.phase_pair)


# ---------------------------------------------------------------------------
# filters
# ---------------------------------------------------------------------------

def cost(candidate: SpectrumSeries, measured: SpectrumSeries, sigma, f_l: float, f_u: float) -> float:
    """Mean squared deviation in units of sigma, weighted equally per decade over [f_l, f_u]."""
    if not 0 < f_l < f_u:
        raise ValidationError("need 0 < f_l < f_u")
    for series in (candidate, measured):
        g = series.grid.values
        if g[0] > f_l * (1 + 1e-12) or g[-1] < f_u * (1 - 1e-12):
            raise GridCoverage(f"grid [{g[0]}, {g[-1]}] does not cover [{f_l}, {f_u}]")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != measured.values.shape or np.any(sigma <= 0):
        raise ValidationError("sigma must be positive and match the measured grid")
    g = measured.grid.values
    inner = g[(g > f_l) & (g < f_u)]
    nodes = np.concatenate([[f_l], inner, [f_u]])
    logg = np.log(g)
    s_m = np.interp(np.log(nodes), logg, measured.values)
    sig = np.interp(np.log(nodes), logg, sigma)
    s_c = candidate.at(nodes)
    integrand = (s_m - s_c) ** 2 / sig**2
    return float(np.trapezoid(integrand, np.log(nodes)) / (math.log(f_u) - math.log(f_l)))


def band_accept(candidate: SpectrumSeries, measured: BinnedSpectrum) -> bool:
    vals = candidate.at(measured.f_center)
    return bool(np.all((vals >= measured.lower) & (vals <= measured.upper)))


def _grid_index(grid: np.ndarray, f: float) -> int:
    i = int(np.argmin(np.abs(grid - f)))
    if not math.isclose(grid[i], f, rel_tol=1e-9):
        raise ValidationError(f"phase frequency {f} is not on the candidate grid")
    return i


def phase_accept(candidate: CrossSpectrum, observations: Sequence[PhaseObservation]) -> bool:
    g = candidate.grid.values
    for obs in observations:
        i = _grid_index(g, obs.f_center)
        if bool(is_zero_phase(candidate.phase[i])) != obs.is_zero:
            return False
    return True


# ---------------------------------------------------------------------------
# Monte-Carlo likelihood
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCLikelihood:
    n_success: int
    n_mc: int
    laplace: bool = False

    @property
    def likelihood(self) -> float:
        if self.laplace:
            return (self.n_success + 1) / (self.n_mc + 2)
        return self.n_success / self.n_mc

    @property
    def standard_error(self) -> float:
        p = self.n_success / self.n_mc
        return math.sqrt(p * (1 - p) / self.n_mc)


def accept_draws(positions, orientations, moments, rates, epsilon_r: float, measurement: MeasurementSet
                 ) -> np.ndarray:
    """Boolean acceptance for a batch of drawn configurations (leading axis = draw)."""
    layout = measurement.layout.array
    sites = sorted(set(measurement.apsd) | (set(measurement.phase_pair) if measurement.phases else set()))
    k = observable_kernels(positions, orientations, moments, layout[sites], epsilon_r, measurement.observable)
    col = {s: i for i, s in enumerate(sites)}
    taus = 1.0 / (2.0 * rates)
    ok = np.ones(positions.shape[0], dtype=bool)
    for s, binned in measurement.apsd.items():
        ks = k[..., col[s]]
        psd = spectra_from_kernels(ks, ks, taus, binned.f_center)
        ok &= np.all((psd >= binned.lower) & (psd <= binned.upper), axis=-1)
    if measurement.phases:
        a, b = measurement.phase_pair
        freqs = np.array([p.f_center for p in measurement.phases])
        want_zero = np.array([p.is_zero for p in measurement.phases])
        s12 = spectra_from_kernels(k[..., col[a]], k[..., col[b]], taus, freqs)
        ok &= np.all((s12 >= 0) == want_zero, axis=-1)
    return ok


def mc_likelihood(hypothesis: ModelHypothesis, measurement: MeasurementSet, n_mc: int, rng_seed,
                  laplace: bool = False, chunk_tls: int = 200_000) -> MCLikelihood:
    """Estimate P(measurement | hypothesis) as n_success / n_mc; deterministic per seed."""
    if n_mc < 1:
        raise ValidationError("n_mc must be >= 1")
    rng = np.random.default_rng(rng_seed)
    per_chunk = max(1, chunk_tls // hypothesis.n_tls)
    successes = 0
    done = 0
    while done < n_mc:
        m = min(per_chunk, n_mc - done)
        pos, orient, mom, rates = draw_configurations(hypothesis, rng, m)
        successes += int(accept_draws(pos, orient, mom, rates, hypothesis.epsilon_r, measurement).sum())
        done += m
    return MCLikelihood(successes, n_mc, laplace)


def hypothesis_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(int(index),))


def sweep_likelihoods(hypotheses: Sequence[ModelHypothesis], measurement: MeasurementSet, n_mc: int,
                      rng_seed: int, laplace: bool = False) -> list[MCLikelihood]:
    return [mc_likelihood(h, measurement, n_mc, hypothesis_seed(rng_seed, j), laplace)
            for j, h in enumerate(hypotheses)]


# ---------------------------------------------------------------------------
# posteriors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PosteriorEntry:
    hypothesis: ModelHypothesis
    likelihood: float
    posterior: float


@dataclass(frozen=True)
class PosteriorTable:
    entries: tuple[PosteriorEntry, ...]
    n_mc: int | None = None
    rng_seed: int | None = None
    warnings: tuple[str, ...] = field(default=(COMPLETENESS_WARNING,))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def hypotheses(self) -> list[ModelHypothesis]:
        return [e.hypothesis for e in self.entries]

    @property
    def posteriors(self) -> np.ndarray:
        return np.array([e.posterior for e in self.entries])

    @property
    def likelihoods(self) -> np.ndarray:
        return np.array([e.likelihood for e in self.entries])

    def mode(self) -> ModelHypothesis:
        return self.entries[int(np.argmax(self.posteriors))].hypothesis

    def to_dict(self) -> dict:
        return {
            "n_mc": self.n_mc,
            "rng_seed": self.rng_seed,
            "warnings": list(self.warnings),
            "entries": [
                {"hypothesis": e.hypothesis.to_dict(), "likelihood": e.likelihood, "posterior": e.posterior}
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "PosteriorTable":
        entries = tuple(PosteriorEntry(ModelHypothesis.from_dict(e["hypothesis"]), e["likelihood"], e["posterior"])
                        for e in doc["entries"])
        return cls(entries, doc.get("n_mc"), doc.get("rng_seed"), tuple(doc.get("warnings", ())))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_tls", "ell_nm", "orientation", "likelihood", "posterior"])
        for e in self.entries:
            h = e.hypothesis
            w.writerow([h.n_tls, repr(h.dipole_length), h.orientation.value, repr(e.likelihood), repr(e.posterior)])
        return buf.getvalue()


def _prior_weights(prior) -> tuple[list[ModelHypothesis], np.ndarray]:
    if isinstance(prior, PosteriorTable):
        return prior.hypotheses, prior.posteriors
    hyps = list(prior)
    w = np.array([h.prior_weight for h in hyps], dtype=float)
    if w.sum() <= 0:
        raise ValidationError("prior weights sum to zero")
    return hyps, w / w.sum()


def bayes_update(prior, likelihoods, n_mc: int | None = None, rng_seed: int | None = None) -> PosteriorTable:
    """posterior_j = L_j prior_j / sum_k L_k prior_k.

    ``prior`` is a sequence of hypotheses (their ``prior_weight`` is used) or
    an earlier :class:`PosteriorTable`.  Raises :class:`AllRejected` when the
    evidence is zero.
    """
    hyps, w = _prior_weights(prior)
    lik = np.array([l.likelihood if isinstance(l, MCLikelihood) else float(l) for l in likelihoods])
    if lik.shape != w.shape:
        raise ValidationError("one likelihood per hypothesis required")
    if np.any(lik < 0):
        raise ValidationError("likelihoods must be non-negative")
    joint = lik * w
    evidence = joint.sum()
    if evidence <= 0:
        raise AllRejected("every hypothesis has zero likelihood")
    post = joint / evidence
    return PosteriorTable(tuple(PosteriorEntry(h, float(l), float(p)) for h, l, p in zip(hyps, lik, post)),
                          n_mc, rng_seed)


def sequential_update(prior, likelihood_sets: Sequence[Sequence[float]], n_mc: int | None = None,
                      rng_seed: int | None = None) -> PosteriorTable:
    """Fold :func:`bayes_update` over independent samples, each posterior becoming the next prior."""
    if not likelihood_sets:
        raise ValidationError("need at least one likelihood set")
    table = prior
    for lik in likelihood_sets:
        table = bayes_update(table, lik, n_mc, rng_seed)
    return table


@dataclass(frozen=True)
class Expectations:
    mean_n_tls: float
    mean_ell: float
    counts: tuple[int, ...]
    lengths: tuple[float, ...]
    marginal: np.ndarray  # P(n_T, ell), summed over orientation; rows = counts
    by_orientation: dict[OrientationClass, dict[str, float]]


def expectations(table: PosteriorTable) -> Expectations:
    """Posterior means, the (count, length) marginal, and per-orientation conditionals."""
    p = table.posteriors
    n = np.array([h.n_tls for h in table.hypotheses], dtype=float)
    ell = np.array([h.dipole_length for h in table.hypotheses], dtype=float)
    counts = tuple(sorted({h.n_tls for h in table.hypotheses}))
    lengths = tuple(sorted({h.dipole_length for h in table.hypotheses}))
    ci = {c: i for i, c in enumerate(counts)}
    li = {l: i for i, l in enumerate(lengths)}
    marginal = np.zeros((len(counts), len(lengths)))
    for h, pj in zip(table.hypotheses, p):
        marginal[ci[h.n_tls], li[h.dipole_length]] += pj
    by_orientation = {}
    orients = [h.orientation for h in table.hypotheses]
    for o in dict.fromkeys(orients):
        mask = np.array([h is o for h in orients])
        po = p[mask].sum()
        cond = {"probability": float(po)}
        if po > 0:
            cond["mean_n_tls"] = float(np.dot(p[mask], n[mask]) / po)
            cond["mean_ell"] = float(np.dot(p[mask], ell[mask]) / po)
        by_orientation[o] = cond
    return Expectations(float(np.dot(p, n)), float(np.dot(p, ell)), counts, lengths, marginal, by_orientation)


def brier(table, truth: int) -> float:
    """Sum over options of (P_j - [j == truth])^2; 0 is perfect, 2 is certain and wrong."""
    p = table.posteriors if isinstance(table, PosteriorTable) else np.asarray(table, dtype=float)
    if not 0 <= truth < p.size:
        raise ValidationError("truth index out of range")
    delta = np.zeros_like(p)
    delta[truth] = 1.0
    return float(np.sum((p - delta) ** 2))


# ---------------------------------------------------------------------------
# underdetermination
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanFamily:
    """Single-TLS candidates at a known height with a fixed (possibly wrong) assumption.

    Each candidate is a grid position (x, y) combined with one of the allowed
    orientations and moments.
    """

    height: float
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    n_x: int = 121
    n_y: int = 121
    orientations: tuple[tuple[float, float, float], ...] = ((0.0, 0.0, 1.0),)
    moments: tuple[float, ...] = (1.0,)

    @staticmethod
    def horizontal(n_angles: int = 36) -> tuple[tuple[float, float, float], ...]:
        phi = np.arange(n_angles) * (math.pi / n_angles)  # +-p give identical spectra
        return tuple((float(math.cos(a)), float(math.sin(a)), 0.0) for a in phi)

    @staticmethod
    def sphere(n_theta: int = 12, n_phi: int = 24) -> tuple[tuple[float, float, float], ...]:
        out = []
        for ct in np.linspace(-1.0, 1.0, n_theta):
            st = math.sqrt(max(0.0, 1 - ct * ct))
            for a in np.arange(n_phi) * (2 * math.pi / n_phi):
                out.append((st * math.cos(a), st * math.sin(a), float(ct)))
        return tuple(out)


@dataclass(frozen=True)
class ScanPoint:
    x: float
    y: float
    orientation: tuple[float, float, float]
    moment: float
    cost: float


def underdetermination_scan(
    true_config: TlsConfiguration,
    layout: QubitLayout,
    family: ScanFamily,
    threshold: float = 0.1,
    sigma_rel: float = 0.1,
    f_l: float | None = None,
    decades: float = 4.0,
    n_freq: int = 81,
    observable=Observable.VOLTAGE,
) -> list[ScanPoint]:
    """Grid-scan single-TLS candidates; return those whose cost summed over all sites is below ``threshold``.

    The measured spectra are the exact spectra of ``true_config`` with
    sigma = ``sigma_rel`` times the spectrum.  Candidates share the true
    switching rate of the first TLS (assumed known).
    """
    true_config.require_nonempty()
    rate = true_config.tls_list[0].switch_rate
    tau = 1.0 / (2.0 * rate)
    if f_l is None:
        f_c = 1.0 / (2 * math.pi * tau)
        f_l = f_c * 10 ** (-decades / 2)
    f_u = f_l * 10**decades
    freqs = np.geomspace(f_l, f_u, n_freq)
    S = len(layout)
    k_true = observable_kernels(true_config.positions, true_config.orientations, true_config.moments,
                                layout.array, true_config.epsilon_r, observable)  # (N, S)
    measured = np.stack([spectra_from_kernels(k_true[:, s], k_true[:, s], true_config.taus, freqs)
                         for s in range(S)])  # (S, F)
    sigma = sigma_rel * measured
    lor = lorentzian(freqs, tau)

    xs = np.linspace(*family.x_range, family.n_x)
    ys = np.linspace(*family.y_range, family.n_y)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pos = np.stack([X.ravel(), Y.ravel(), np.full(X.size, family.height)], axis=-1)  # (P, 3)
    logf = np.log(freqs)
    norm = logf[-1] - logf[0]
    out = []
    for orient in family.orientations:
        o = np.broadcast_to(np.asarray(orient, dtype=float), pos.shape)
        k_unit = observable_kernels(pos[:, None, :], o[:, None, :], np.ones((len(pos), 1)),
                                    layout.array, true_config.epsilon_r, observable)[:, 0, :]  # (P, S)
        for moment in family.moments:
            s_c = (moment * k_unit)[..., None] ** 2 * lor  # (P, S, F)
            integrand = (measured - s_c) ** 2 / sigma**2
            c = np.trapezoid(integrand, logf, axis=-1).sum(axis=-1) / norm
            for i in np.nonzero(c < threshold)[0]:
                out.append(ScanPoint(float(pos[i, 0]), float(pos[i, 1]), tuple(float(v) for v in orient),
                                     float(moment), float(c[i])))
    return out
