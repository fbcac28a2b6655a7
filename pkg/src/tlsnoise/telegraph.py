"""Random telegraph simulation and FFT spectral estimation.

Each TLS flips as a Poisson process; flip times are drawn from exponential
inter-arrival gaps and the state is read off at the uniform sample instants.
Every (TLS index, realization) pair gets its own RNG stream spawned from the
master seed, so results do not depend on evaluation order.

Estimators use a rectangular window with no detrending or overlap, and the
one-sided normalization of :mod:`tlsnoise.spectra`.  The DC bin is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import LengthMismatch, ValidationError
from .geometry import Observable, QubitLayout, Tls, TlsConfiguration, observable_kernels
from .spectra import FrequencyGrid


@dataclass(frozen=True)
class TimeSeriesSpec:
    duration: float  # s
    sample_interval: float  # s
    n_realizations: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if not self.sample_interval > 0:
            raise ValidationError("sample_interval must be positive")
        ratio = self.duration / self.sample_interval
        n = round(ratio)
        if abs(ratio - n) > 1e-9 * max(1.0, ratio) or n < 2:
            raise ValidationError("duration must be an integer number (>= 2) of sample intervals")
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            raise ValidationError("n_realizations must be a positive integer")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.sample_interval))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.sample_interval

    @property
    def frequencies(self) -> np.ndarray:
        """FFT bin frequencies above DC, up to and including Nyquist when N is even."""
        n = self.n_samples
        return np.arange(1, n // 2 + 1) / (n * self.sample_interval)

    def stream(self, tls_index: int, realization: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.rng_seed, spawn_key=(int(tls_index), int(realization)))
        return np.random.Generator(np.random.PCG64(seq))


def telegraph_states(rate: float, times: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Symmetric +-1 telegraph sampled at ``times`` (starting at 0)."""
    s0 = 1 if rng.random() < 0.5 else -1
    t_end = float(times[-1])
    if rate <= 0 or t_end <= 0:
        return np.full(times.shape, s0, dtype=np.int8)
    expected = rate * t_end
    chunk = int(expected + 10.0 * math.sqrt(expected) + 16)
    flips = np.cumsum(rng.exponential(1.0 / rate, size=chunk))
    while flips[-1] <= t_end:
        more = np.cumsum(rng.exponential(1.0 / rate, size=chunk)) + flips[-1]
        flips = np.concatenate([flips, more])
    count = np.searchsorted(flips, times, side="right")
    parity = (count & 1).astype(np.int8)
    return (s0 * (1 - 2 * parity)).astype(np.int8)


def simulate_telegraph(tls: Tls, spec: TimeSeriesSpec, realization: int, tls_index: int = 0) -> np.ndarray:
    return telegraph_states(tls.switch_rate, spec.times, spec.stream(tls_index, realization))


def iter_qubit_records(config: TlsConfiguration, layout: QubitLayout, observable, spec: TimeSeriesSpec
                       ) -> Iterator[np.ndarray]:
    """Yield one (S, N) record array per realization."""
    config.require_nonempty()
    k = observable_kernels(config.positions, config.orientations, config.moments,
                           layout.array, config.epsilon_r, observable)  # (n_tls, S)
    times = spec.times
    for r in range(spec.n_realizations):
        states = np.empty((len(config), times.size))
        for n, tls in enumerate(config.tls_list):
            states[n] = telegraph_states(tls.switch_rate, times, spec.stream(n, r))
        yield k.T @ states


def synthesize_qubit_records(config: TlsConfiguration, layout: QubitLayout, observable, spec: TimeSeriesSpec
                             ) -> np.ndarray:
    """Noise records with shape (n_realizations, n_sites, n_samples), in V or V/nm.

    All sites see the same telegraph draws.
    """
    return np.stack(list(iter_qubit_records(config, layout, observable, spec)))


@dataclass(frozen=True)
class EstimatedSpectrum:
    grid: FrequencyGrid
    n_realizations: int
    apsd: np.ndarray | None = None
    cpsd: np.ndarray | None = None
    apsd_a: np.ndarray | None = None
    apsd_b: np.ndarray | None = None

    @property
    def normalized(self) -> np.ndarray:
        if self.cpsd is None:
            raise ValidationError("no cross-spectrum in this estimate")
        return self.cpsd / np.sqrt(self.apsd_a * self.apsd_b)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.normalized)

    @property
    def strength(self) -> np.ndarray:
        return np.abs(self.normalized)


def _one_sided_scale(n: int, dt: float) -> np.ndarray:
    scale = np.full(n // 2, 2.0 * dt / n)
    if n % 2 == 0:
        scale[-1] = dt / n
    return scale


def periodogram(record: np.ndarray, dt: float) -> np.ndarray:
    """One-sided periodogram for bins 1..N//2 of each row of ``record``."""
    record = np.atleast_2d(record)
    n = record.shape[-1]
    x = np.fft.rfft(record, axis=-1)[..., 1:n // 2 + 1]
    return _one_sided_scale(n, dt) * np.abs(x) ** 2


def cross_periodogram(rec_a: np.ndarray, rec_b: np.ndarray, dt: float) -> np.ndarray:
    n = rec_a.shape[-1]
    xa = np.fft.rfft(rec_a, axis=-1)[..., 1:n // 2 + 1]
    xb = np.fft.rfft(rec_b, axis=-1)[..., 1:n // 2 + 1]
    return _one_sided_scale(n, dt) * np.conj(xa) * xb


def _as_realizations(records, spec: TimeSeriesSpec) -> np.ndarray:
    rec = np.asarray(records, dtype=float)
    if rec.ndim == 1:
        rec = rec[None, :]
    if rec.shape[-1] != spec.n_samples:
        raise LengthMismatch(f"records have {rec.shape[-1]} samples, spec expects {spec.n_samples}")
    return rec


def estimate_psd(records, spec: TimeSeriesSpec) -> EstimatedSpectrum:
    """Realization-averaged periodogram; ``records`` has shape (R, N) or (N,)."""
    rec = _as_realizations(records, spec)
    psd = periodogram(rec, spec.sample_interval).mean(axis=0)
    return EstimatedSpectrum(FrequencyGrid(spec.frequencies), rec.shape[0], apsd=psd)


def estimate_cpsd(records_a, records_b, spec: TimeSeriesSpec) -> EstimatedSpectrum:
    ra = _as_realizations(records_a, spec)
    rb = _as_realizations(records_b, spec)
    if ra.shape != rb.shape:
        raise LengthMismatch(f"record shapes differ: {ra.shape} vs {rb.shape}")
    dt = spec.sample_interval
    return EstimatedSpectrum(
        FrequencyGrid(spec.frequencies), ra.shape[0],
        cpsd=cross_periodogram(ra, rb, dt).mean(axis=0),
        apsd_a=periodogram(ra, dt).mean(axis=0),
        apsd_b=periodogram(rb, dt).mean(axis=0),
    )


@dataclass(frozen=True)
class SiteEstimates:
    """Per-realization and averaged estimates for every site of a layout."""

    grid: FrequencyGrid
    apsd: np.ndarray  # (R, S, F)
    cpsd: dict[tuple[int, int], np.ndarray]  # pair -> (R, F) complex

    @property
    def n_realizations(self) -> int:
        return self.apsd.shape[0]

    def site(self, s: int) -> EstimatedSpectrum:
        return EstimatedSpectrum(self.grid, self.n_realizations, apsd=self.apsd[:, s].mean(axis=0))

    def pair(self, a: int, b: int) -> EstimatedSpectrum:
        return EstimatedSpectrum(self.grid, self.n_realizations,
                                 cpsd=self.cpsd[(a, b)].mean(axis=0),
                                 apsd_a=self.apsd[:, a].mean(axis=0),
                                 apsd_b=self.apsd[:, b].mean(axis=0))


def estimate_from_config(config: TlsConfiguration, layout: QubitLayout, observable, spec: TimeSeriesSpec,
                         pairs: tuple[tuple[int, int], ...] = ()) -> SiteEstimates:
    """Simulate and estimate realization by realization without holding every record."""
    dt = spec.sample_interval
    apsd, cross = [], {p: [] for p in pairs}
    for rec in iter_qubit_records(config, layout, Observable.parse(observable), spec):
        apsd.append(periodogram(rec, dt))
        for a, b in pairs:
            cross[(a, b)].append(cross_periodogram(rec[a], rec[b], dt))
    return SiteEstimates(FrequencyGrid(spec.frequencies), np.stack(apsd),
                         {p: np.stack(v) for p, v in cross.items()})
