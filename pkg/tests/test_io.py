import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsnoise.errors import NonPositiveSigma, ParseError, UnsortedFrequencies, ValidationError
from tlsnoise.io import atomic_write, csv_text, fmt, ingest_psd, log_bin_edges, log_rebin, sha256_file


def write(tmp_path, text, name="psd.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_rows_give_three_bins(tmp_path):
    p = write(tmp_path, "frequency_hz,psd,sigma\n0.001,5.0,0.5\n0.01,2.0,0.2\n0.1,1.0,0.1\n")
    b = ingest_psd(p)
    assert len(b) == 3
    assert b.f_center.tolist() == [0.001, 0.01, 0.1]
    assert b.upper.tolist() == pytest.approx([6.5, 2.6, 1.3])


def test_missing_sigma_column_is_a_header_error(tmp_path):
    p = write(tmp_path, "frequency_hz,psd\n0.001,5.0\n0.01,2.0\n")
    with pytest.raises(ParseError) as err:
        ingest_psd(p)
    assert err.value.line == 1


def test_line_numbered_errors(tmp_path):
    with pytest.raises(UnsortedFrequencies) as err:
        ingest_psd(write(tmp_path, "frequency_hz,psd,sigma\n0.01,1,1\n0.02,1,1\n0.015,1,1\n"))
    assert err.value.line == 4 and "line 4" in str(err.value)
    with pytest.raises(NonPositiveSigma) as err:
        ingest_psd(write(tmp_path, "frequency_hz,psd,sigma\n0.01,1,1\n0.02,1,0\n"))
    assert err.value.line == 3
    with pytest.raises(ParseError) as err:
        ingest_psd(write(tmp_path, "frequency_hz,psd,sigma\n0.01,1,1\n0.02,abc,1\n"))
    assert err.value.line == 3
    with pytest.raises(ParseError) as err:
        ingest_psd(write(tmp_path, "frequency_hz,psd,sigma\n0.01,1\n"))
    assert err.value.line == 2
    with pytest.raises(ParseError):
        ingest_psd(write(tmp_path, ""))
    with pytest.raises(ParseError):
        ingest_psd(write(tmp_path, "frequency_hz,psd,sigma\n"))
    with pytest.raises(ValidationError):
        ingest_psd(tmp_path / "missing.csv")


def test_rebin_forty_points_one_bin_per_decade(tmp_path):
    # ten points per decade over four decades, one bin per decade -> four bins holding the decade means
    f = np.logspace(-4, 0, 40, endpoint=False)
    v = np.arange(40, dtype=float) ** 1.5 + 1.0
    text = csv_text(["frequency_hz", "psd"], zip(f, v))
    b = ingest_psd(write(tmp_path, text), rebin=True, bins_per_decade=1)
    assert len(b) == 4
    for i in range(4):
        chunk = v[10 * i:10 * (i + 1)]
        assert b.mean[i] == pytest.approx(chunk.mean(), rel=1e-14)
        assert b.sigma[i] == pytest.approx(chunk.std(ddof=1), rel=1e-12)
        assert b.f_center[i] == pytest.approx(np.exp(np.log(f[10 * i:10 * (i + 1)]).mean()), rel=1e-12)


def test_frequency_window_on_ingest(tmp_path):
    p = write(tmp_path, "frequency_hz,psd,sigma\n0.001,5.0,0.5\n0.01,2.0,0.2\n0.1,1.0,0.1\n")
    assert ingest_psd(p, f_min=0.005).f_center.tolist() == [0.01, 0.1]
    with pytest.raises(ValidationError):
        ingest_psd(p, f_min=1.0)


def test_bin_edges_lattice():
    e = log_bin_edges(1e-3, 1e-1, 10)
    assert e.size == 21
    assert e[0] == pytest.approx(1e-3) and e[-1] == pytest.approx(1e-1)
    assert np.allclose(np.diff(np.log10(e)), 0.1)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(20, 400), bpd=st.sampled_from([1, 2, 5, 10]), seed=st.integers(0, 10_000))
def test_rebin_partitions_points(n, bpd, seed):
    rng = np.random.default_rng(seed)
    f = np.sort(rng.uniform(-3, -1, n))
    f = 10 ** np.unique(f)
    v = rng.exponential(size=f.size)
    b = log_rebin(f, v, bpd, min_points=2)
    edges = log_bin_edges(f[0], f[-1], bpd)
    assert np.all(np.diff(b.f_center) > 0)
    assert np.all(b.f_center >= f[0] * (1 - 1e-12)) and np.all(b.f_center <= f[-1] * (1 + 1e-12))
    assert len(b) <= edges.size - 1


def test_fmt_round_trips():
    for x in (0.1, 1e-300, 123456789.123, -2.5e17):
        assert float(fmt(x)) == x
    assert fmt(np.int64(3)) == "3" and fmt(True) == "true"


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "out.txt"
    atomic_write(p, "first")
    atomic_write(p, "second")
    assert p.read_text() == "second"
    assert os.listdir(p.parent) == ["out.txt"]
    assert len(sha256_file(p)) == 64
