"""File formats: spectrum CSVs, measured-PSD ingestion, atomic writes, hashes."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NonPositiveSigma, ParseError, UnsortedFrequencies, ValidationError
from .inference import BinnedSpectrum
from .spectra import CrossSpectrum, SpectrumSeries


def fmt(value) -> str:
    """Shortest round-trip text for numbers, so reruns are byte-identical."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def atomic_write(path, data: str | bytes) -> Path:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# spectrum CSVs
# ---------------------------------------------------------------------------

def apsd_csv(series: SpectrumSeries) -> str:
    return csv_text(["frequency_hz", "value"], zip(series.grid.values, series.values))


def cpsd_csv(cross: CrossSpectrum) -> str:
    rows = zip(cross.grid.values, cross.values.real, cross.values.imag, cross.strength, cross.phase)
    return csv_text(["frequency_hz", "re", "im", "strength", "phase"], rows)


def binned_csv(binned: BinnedSpectrum) -> str:
    return csv_text(["frequency_hz", "psd", "sigma"], zip(binned.f_center, binned.mean, binned.sigma))


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def log_bin_edges(f_min: float, f_max: float, bins_per_decade: float) -> np.ndarray:
    """Edges on the 10**(k / bins_per_decade) lattice that enclose [f_min, f_max]."""
    if not (0 < f_min <= f_max) or bins_per_decade <= 0:
        raise ValidationError("need 0 < f_min <= f_max and bins_per_decade > 0")
    eps = 1e-9
    k_lo = math.floor(math.log10(f_min) * bins_per_decade + eps)
    k_hi = math.ceil(math.log10(f_max) * bins_per_decade - eps)
    if k_hi == k_lo:
        k_hi += 1
    return 10.0 ** (np.arange(k_lo, k_hi + 1) / bins_per_decade)


def log_rebin(freqs, values, bins_per_decade: float = 10.0, f_min: float | None = None,
              f_max: float | None = None, band_multiplier: float = 3.0, min_points: int = 2
              ) -> BinnedSpectrum:
    """Group points into log-spaced bins; each bin gives its mean and sample standard deviation.

    Bins are half-open [lo, hi) except the last.  The bin center is the
    geometric mean of its member frequencies.  Bins with fewer than
    ``min_points`` members, or zero spread, are dropped.
    """
    f = np.asarray(freqs, dtype=float)
    v = np.asarray(values, dtype=float)
    lo = f[0] if f_min is None else f_min
    hi = f[-1] if f_max is None else f_max
    keep = (f >= lo * (1 - 1e-12)) & (f <= hi * (1 + 1e-12))
    f, v = f[keep], v[keep]
    if f.size == 0:
        raise ValidationError("no points inside the re-binning range")
    edges = log_bin_edges(lo, hi, bins_per_decade)
    idx = np.clip(np.searchsorted(edges, f * (1 + 1e-12), side="right") - 1, 0, edges.size - 2)
    centers, means, sigmas = [], [], []
    for b in range(edges.size - 1):
        sel = idx == b
        if sel.sum() < max(2, min_points):
            continue
        sd = float(np.std(v[sel], ddof=1))
        if not sd > 0:
            continue
        centers.append(float(np.exp(np.mean(np.log(f[sel])))))
        means.append(float(np.mean(v[sel])))
        sigmas.append(sd)
    if not centers:
        raise ValidationError("re-binning produced no usable bins")
    return BinnedSpectrum(np.array(centers), np.array(means), np.array(sigmas), band_multiplier)


def _parse_rows(path) -> tuple[list[str], list[tuple[int, list[float]]]]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=line)
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ParseError(f"non-numeric value in {row}", line=line) from None
            if not all(math.isfinite(x) for x in vals):
                raise ParseError("non-finite value", line=line)
            rows.append((line, vals))
    if not rows:
        raise ParseError("no data rows", line=2)
    return header, rows


def ingest_psd(path, rebin: bool = False, bins_per_decade: float = 10.0, band_multiplier: float = 3.0,
               f_min: float | None = None, f_max: float | None = None) -> BinnedSpectrum:
    """Read a measured PSD CSV.

    Without re-binning the header must be ``frequency_hz,psd,sigma`` and
    each row becomes one bin.  With ``rebin`` the file needs
    ``frequency_hz,psd`` (a sigma column is ignored) and the points are
    grouped with :func:`log_rebin`.
    """
    header, rows = _parse_rows(path)
    need = ["frequency_hz", "psd"] if rebin else ["frequency_hz", "psd", "sigma"]
    if header[: len(need)] != need or len(header) > 3 or (len(header) == 3 and header[2] != "sigma"):
        raise ParseError(f"header must be {','.join(need)}, got {','.join(header)}", line=1)
    prev = -math.inf
    for line, vals in rows:
        if vals[0] <= 0:
            raise ParseError("frequency must be positive", line=line)
        if vals[0] <= prev:
            raise UnsortedFrequencies("frequencies must be strictly increasing", line=line)
        prev = vals[0]
        if not rebin and vals[2] <= 0:
            raise NonPositiveSigma("sigma must be positive", line=line)
    data = np.array([vals for _, vals in rows])
    if rebin:
        return log_rebin(data[:, 0], data[:, 1], bins_per_decade, f_min, f_max, band_multiplier)
    binned = BinnedSpectrum(data[:, 0], data[:, 1], data[:, 2], band_multiplier)
    if f_min is not None or f_max is not None:
        lo = f_min or 0.0
        hi = f_max or math.inf
        sel = (binned.f_center >= lo) & (binned.f_center <= hi)
        if not sel.any():
            raise ValidationError("no bins inside the requested frequency range")
        binned = BinnedSpectrum(binned.f_center[sel], binned.mean[sel], binned.sigma[sel], band_multiplier)
    return binned
