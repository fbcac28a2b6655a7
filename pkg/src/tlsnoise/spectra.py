"""Analytic auto- and cross-power spectral densities of TLS noise.

Convention: spectra are one-sided densities over f > 0.  A unit-variance
telegraph signal with autocorrelation ``exp(-|t|/tau)`` contributes the
Lorentzian ``4 tau / (1 + (2 pi f tau)^2)``, which integrates to 1 over
(0, inf).  The FFT estimators in :mod:`tlsnoise.telegraph` use the matching
normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSpectrum, EmptyRange, ValidationError
from .geometry import (
    Observable,
    OrientationClass,
    QubitLayout,
    TlsConfiguration,
    observable_kernels,
    sample_orientations,
    sample_positions,
    sample_switch_rates,
)

PHASE_FREQUENCIES_HZ = (1e-4, 1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class FrequencyGrid:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValidationError("frequencies must be finite and positive")
        if np.any(np.diff(v) <= 0):
            raise ValidationError("frequencies must be strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def log(cls, f_min: float, f_max: float, n: int) -> "FrequencyGrid":
        return cls(np.geomspace(f_min, f_max, n))


def _grid(grid) -> FrequencyGrid:
    return grid if isinstance(grid, FrequencyGrid) else FrequencyGrid(np.asarray(grid, dtype=float))


@dataclass(frozen=True)
class SpectrumSeries:
    grid: FrequencyGrid
    values: np.ndarray
    observable: Observable = Observable.VOLTAGE
    site_index: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise ValidationError("spectrum values must match the grid length")
        if np.any(v < 0):
            raise ValidationError("auto-spectrum values must be non-negative")
        object.__setattr__(self, "values", v)

    def at(self, frequencies) -> np.ndarray:
        """Log-log interpolation onto ``frequencies`` (must lie inside the grid)."""
        f = np.asarray(frequencies, dtype=float)
        g = self.grid.values
        if np.any(f < g[0] * (1 - 1e-12)) or np.any(f > g[-1] * (1 + 1e-12)):
            raise ValidationError("requested frequencies fall outside the spectrum grid")
        with np.errstate(divide="ignore"):
            logv = np.log(self.values)
        out = np.exp(np.interp(np.log(f), np.log(g), logv))
        return np.where(np.isfinite(out), out, 0.0)


@dataclass(frozen=True)
class CrossSpectrum:
    grid: FrequencyGrid
    values: np.ndarray  # complex
    normalized: np.ndarray  # complex
    phase: np.ndarray
    origin: str = "analytic"
    observable: Observable = Observable.VOLTAGE
    site_pair: tuple[int, int] = (0, 1)

    @property
    def strength(self) -> np.ndarray:
        return np.abs(self.normalized)


def lorentzian(f, tau) -> np.ndarray:
    """One-sided PSD of a unit-variance telegraph signal; broadcasts f against tau."""
    f = np.asarray(f, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return 4.0 * tau / (1.0 + (2.0 * math.pi * f * tau) ** 2)


def spectra_from_kernels(k_a: np.ndarray, k_b: np.ndarray, taus: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """sum_n k_a[n] k_b[n] L(f; tau_n) with leading batch axes; result (..., F)."""
    lor = lorentzian(np.asarray(freqs)[None, :], np.asarray(taus)[..., None])  # (..., N, F)
    return np.einsum("...n,...nf->...f", k_a * k_b, lor)


def config_kernels(config: TlsConfiguration, layout: QubitLayout, observable) -> np.ndarray:
    config.require_nonempty()
    return observable_kernels(config.positions, config.orientations, config.moments,
                              layout.array, config.epsilon_r, observable)


def _check_site(layout: QubitLayout, site: int) -> None:
    if not 0 <= site < len(layout):
        raise ValidationError(f"site index {site} out of range for {len(layout)} sites")


def analytic_apsd(config: TlsConfiguration, layout: QubitLayout, site: int, observable, grid) -> SpectrumSeries:
    observable = Observable.parse(observable)
    grid = _grid(grid)
    _check_site(layout, site)
    k = config_kernels(config, layout, observable)[:, site]
    values = spectra_from_kernels(k, k, config.taus, grid.values)
    return SpectrumSeries(grid, values, observable, site)


def analytic_cpsd(config: TlsConfiguration, layout: QubitLayout, site_a: int, site_b: int, observable, grid
                  ) -> CrossSpectrum:
    observable = Observable.parse(observable)
    grid = _grid(grid)
    _check_site(layout, site_a)
    _check_site(layout, site_b)
    if site_a == site_b:
        raise ValidationError("cross-spectrum needs two distinct site indices")
    k = config_kernels(config, layout, observable)
    ka, kb = k[:, site_a], k[:, site_b]
    s12 = spectra_from_kernels(ka, kb, config.taus, grid.values)
    s1 = spectra_from_kernels(ka, ka, config.taus, grid.values)
    s2 = spectra_from_kernels(kb, kb, config.taus, grid.values)
    if np.any(s1 <= 0) or np.any(s2 <= 0):
        raise DegenerateSpectrum("an auto-spectrum vanishes on the grid")
    normalized = s12 / np.sqrt(s1 * s2)
    phase = np.where(s12 >= 0, 0.0, math.pi)
    return CrossSpectrum(grid, s12.astype(complex), normalized.astype(complex), phase,
                         "analytic", observable, (site_a, site_b))


def _log_trapezoid_weights(f: np.ndarray) -> np.ndarray:
    x = np.log(f)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def is_zero_phase(phase: np.ndarray) -> np.ndarray:
    """True where the phase is nearer 0 than pi (wrapped)."""
    return np.abs(np.angle(np.exp(1j * np.asarray(phase)))) < math.pi / 2


def weighted_phase_percentages(cross: CrossSpectrum, f_lo: float, f_hi: float) -> tuple[float, float]:
    """Percent of the log-frequency range [f_lo, f_hi] with phase 0 and with phase pi.

    Each decade carries equal weight (measure df/f); the indicator is
    integrated by the trapezoid rule on log f over the grid points in range.
    """
    if not f_lo < f_hi:
        raise EmptyRange(f"need f_lo < f_hi, got {f_lo}, {f_hi}")
    f = cross.grid.values
    mask = (f >= f_lo * (1 - 1e-12)) & (f <= f_hi * (1 + 1e-12))
    if mask.sum() < 2:
        raise EmptyRange("fewer than two grid points inside the requested range")
    w = _log_trapezoid_weights(f[mask])
    zero = is_zero_phase(cross.phase[mask]).astype(float)
    pct_zero = 100.0 * float(np.sum(w * zero)) / float(np.sum(w))
    return pct_zero, 100.0 - pct_zero


# ---------------------------------------------------------------------------
# orientation ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrientationSummary:
    orientation: OrientationClass
    pct_zero: np.ndarray
    pct_pi: np.ndarray
    strength_mean: float
    strength_std: float

    @staticmethod
    def _quartiles(x):
        q1, med, q3 = np.percentile(x, [25, 50, 75])
        return float(med), float(q3 - q1)

    @property
    def median_pct_zero(self) -> float:
        return self._quartiles(self.pct_zero)[0]

    @property
    def median_pct_pi(self) -> float:
        return self._quartiles(self.pct_pi)[0]

    @property
    def iqr_pct_zero(self) -> float:
        return self._quartiles(self.pct_zero)[1]

    @property
    def iqr_pct_pi(self) -> float:
        return self._quartiles(self.pct_pi)[1]

    def as_row(self) -> dict:
        return {
            "orientation": self.orientation.value,
            "median_pct_zero": self.median_pct_zero,
            "iqr_pct_zero": self.iqr_pct_zero,
            "median_pct_pi": self.median_pct_pi,
            "iqr_pct_pi": self.iqr_pct_pi,
            "strength_mean": self.strength_mean,
            "strength_std": self.strength_std,
        }


def orientation_ensemble_stats(
    template,
    layout: QubitLayout,
    n_samples: int,
    rng_seed: int,
    grid,
    strength_freqs: Sequence[float] = PHASE_FREQUENCIES_HZ,
    orientations: Sequence[OrientationClass] = tuple(OrientationClass),
    observable=Observable.VOLTAGE,
    site_pair: tuple[int, int] = (0, 1),
) -> dict[OrientationClass, OrientationSummary]:
    """Phase percentages and correlation strength over sampled configurations, per orientation class.

    ``template`` is a :class:`~tlsnoise.hypothesis.ModelHypothesis` giving the
    count, layer, rates and moment; its orientation is replaced by each class.
    Positions and rates are shared by every class so the classes differ only
    in orientation.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    grid = _grid(grid)
    f = grid.values
    strength_freqs = np.asarray(strength_freqs, dtype=float)
    a, b = site_pair
    out = {}
    base_rng = np.random.default_rng(rng_seed)
    shape = (n_samples, template.n_tls)
    pos = sample_positions(template.boxes, base_rng, shape)
    rates = sample_switch_rates(template.rate_interval, base_rng, shape)
    mom = np.full(shape, template.moment)
    for j, orientation in enumerate(orientations):
        orientation = OrientationClass.parse(orientation)
        orient = sample_orientations(orientation, np.random.default_rng([rng_seed, j + 1]), shape)
        k = observable_kernels(pos, orient, mom, layout.array, template.epsilon_r, observable)
        taus = 1.0 / (2.0 * rates)
        ka, kb = k[..., a], k[..., b]
        all_f = np.concatenate([f, strength_freqs])
        s12 = spectra_from_kernels(ka, kb, taus, all_f)
        s1 = spectra_from_kernels(ka, ka, taus, all_f)
        s2 = spectra_from_kernels(kb, kb, taus, all_f)
        norm = s12 / np.sqrt(s1 * s2)
        nf = f.size
        pz = np.empty(n_samples)
        w = _log_trapezoid_weights(f)
        for i in range(n_samples):
            zero = (s12[i, :nf] >= 0).astype(float)
            pz[i] = 100.0 * float(np.sum(w * zero)) / float(np.sum(w))
        strength = np.abs(norm[:, nf:])
        out[orientation] = OrientationSummary(
            orientation, pz, 100.0 - pz, float(strength.mean()), float(strength.std()))
    return out
