"""Command-line front end.

Every command writes its outputs into ``--out-dir`` together with
``run_manifest.json`` (resolved parameters, seed, versions, wall time and a
sha256 for each output).  Parameters come from built-in defaults, then an
optional ``--config`` JSON file, then the command line, later sources
winning.

Exit codes: 0 success, 2 invalid input, 3 every hypothesis rejected,
1 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .continuum import DiscLayer, critical_separation, sweep
from .errors import AllRejected, NoBracket, ParseError, TlsNoiseError, ValidationError
from .experiments import (
    BrierProtocol,
    SyntheticSettings,
    run_brier_protocol,
    sweep_posterior,
    synthetic_measurement,
)
from .geometry import LayerBox, Observable, OrientationClass, QubitLayout, TlsConfiguration, sample_configuration
from .hypothesis import ModelHypothesis, geometric_counts, hypothesis_grid, log_lengths
from .inference import (
    COMPLETENESS_WARNING,
    MeasurementSet,
    PhaseObservation,
    ScanFamily,
    expectations,
    underdetermination_scan,
)
from .io import apsd_csv, atomic_write, binned_csv, cpsd_csv, csv_text, ingest_psd, json_text, log_rebin, sha256_file
from .spectra import (
    FrequencyGrid,
    analytic_apsd,
    analytic_cpsd,
    orientation_ensemble_stats,
)
from .telegraph import TimeSeriesSpec, estimate_from_config, iter_qubit_records

OBSERVABLE_CHOICES = ("voltage", "ex", "ey", "ez")
ORIENTATION_CHOICES = tuple(o.cli_name for o in OrientationClass)

COMMON_DEFAULTS = {
    "seed": 0,
    "observable": "voltage",
    "separation": 100.0,
    "layer": [-150.0, 150.0, -150.0, 150.0, 72.0, 72.0],
    "epsilon_r": 11.0,
    "rate_min": 1e-5,
    "rate_max": 1.0,
    "svg": False,
}

COMMAND_DEFAULTS = {
    "simulate": {
        "tls_config": None, "n_tls": 10, "ell": 1.0, "orientation": "fully-random",
        "duration": 10_000.0, "dt": 1.0, "n_realizations": 10,
        "bins_per_decade": 10.0, "f_min": 1e-3, "f_max": 1e-1,
    },
    "spectra": {
        "tls_config": None, "n_tls": 10, "ell": 1.0, "orientation": "fully-random",
        "f_min": 1e-4, "f_max": 1e-1, "n_freq": 301, "ensemble": 0,
    },
    "continuum": {"R": 100.0, "h": 50.0, "d_max": 150.0, "d_step": 1.0},
    "scan-underdetermined": {
        "mode": "orientation", "height": 72.0, "candidate_height": None, "true_x": 0.0, "true_y": 120.0,
        "true_moment": 1.0, "rate": 1e-2, "half_width": 200.0, "grid": 81, "threshold": 0.1, "sigma_rel": 0.1,
    },
    "infer-apsd": {
        "psd": None, "rebin": False, "n_mc": 1000, "band_k": 3.0, "bins_per_decade": 10.0,
        "f_min": 1e-3, "f_max": 1e-1, "orientation": ["fully-random"],
        "counts": None, "ell_center": 1.0, "ell_decades": 2.0, "ell_members": 13,
        "truth_n": 13, "truth_ell": 1.0, "truth_orientation": "fully-random",
        "n_realizations": 20, "n_samples": 20_000, "dt": 1.0,
    },
    "brier-eval": {"n_seeds": 20, "n_mc": 20_000, "band_k": 3.0, "bins_per_decade": 10.0,
                   "f_min": 1e-3, "f_max": 1e-1},
}
COMMAND_DEFAULTS["infer-cpsd"] = dict(COMMAND_DEFAULTS["infer-apsd"], phases=None, phase_min_strength=0.3)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add(p, *flags, **kw):
    p.add_argument(*flags, default=argparse.SUPPRESS, **kw)


def _common(p):
    _add(p, "--config", dest="config_file", help="JSON file of parameters (keys are option names with underscores)")
    _add(p, "--seed", type=int, help="master random seed (default 0)")
    _add(p, "--out-dir", dest="out_dir", required=True, help="directory for outputs and run_manifest.json")
    _add(p, "--observable", choices=OBSERVABLE_CHOICES)
    _add(p, "--separation", type=float, help="qubit separation along x in nm (sites at +-separation/2)")
    _add(p, "--layer", type=_floats, help="x0,x1,y0,y1,z0,z1 in nm")
    _add(p, "--epsilon-r", dest="epsilon_r", type=float)
    _add(p, "--rate-min", dest="rate_min", type=float, help="lowest switching rate in Hz")
    _add(p, "--rate-max", dest="rate_max", type=float, help="highest switching rate in Hz")


def _freq(p):
    _add(p, "--f-min", dest="f_min", type=float)
    _add(p, "--f-max", dest="f_max", type=float)


def _config_source(p):
    _add(p, "--tls-config", dest="tls_config", help="TLS configuration JSON; otherwise one is sampled")
    _add(p, "--n-tls", dest="n_tls", type=int)
    _add(p, "--ell", type=float, help="dipole length in nm (moment = ell e nm)")
    _add(p, "--orientation", choices=ORIENTATION_CHOICES)


def _inference(p, phases: bool):
    _add(p, "--psd", action="append", help="measured PSD CSV; repeat once per site in site order")
    _add(p, "--rebin", action="store_true", help="re-bin raw frequency_hz,psd points into log bins")
    if phases:
        _add(p, "--phases", help="CSV with header frequency_hz,phase (phase 0 or pi)")
        _add(p, "--phase-min-strength", dest="phase_min_strength", type=float,
             help="synthetic data: keep phase bins whose normalized strength exceeds this")
    _add(p, "--n-mc", dest="n_mc", type=int)
    _add(p, "--band-k", dest="band_k", type=float)
    _add(p, "--bins-per-decade", dest="bins_per_decade", type=float)
    _freq(p)
    _add(p, "--orientation", nargs="+", choices=ORIENTATION_CHOICES, help="orientation classes to sweep")
    _add(p, "--counts", type=_ints, help="comma-separated TLS counts (default 13-point geometric 1..177)")
    _add(p, "--ell-center", dest="ell_center", type=float)
    _add(p, "--ell-decades", dest="ell_decades", type=float)
    _add(p, "--ell-members", dest="ell_members", type=int)
    _add(p, "--truth-n", dest="truth_n", type=int, help="synthetic data: true TLS count")
    _add(p, "--truth-ell", dest="truth_ell", type=float, help="synthetic data: true dipole length")
    _add(p, "--truth-orientation", dest="truth_orientation", choices=ORIENTATION_CHOICES)
    _add(p, "--n-realizations", dest="n_realizations", type=int)
    _add(p, "--n-samples", dest="n_samples", type=int)
    _add(p, "--dt", type=float)
    _add(p, "--svg", action="store_true", help="also write an SVG heatmap of P(n_T, ell)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsnoise", description="Simulate two-level-fluctuator charge noise at qubits and infer its sources.")
    parser.add_argument("--version", action="version", version=f"tlsnoise {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="telegraph time series and FFT spectral estimates")
    _common(p)
    _config_source(p)
    _add(p, "--duration", type=float, help="record length in s")
    _add(p, "--dt", type=float, help="sample interval in s")
    _add(p, "--n-realizations", dest="n_realizations", type=int)
    _add(p, "--bins-per-decade", dest="bins_per_decade", type=float)
    _freq(p)

    p = sub.add_parser("spectra", help="analytic APSD/CPSD and orientation phase statistics")
    _common(p)
    _config_source(p)
    _freq(p)
    _add(p, "--n-freq", dest="n_freq", type=int)
    _add(p, "--ensemble", type=int, help="also sample this many configurations per orientation class")

    p = sub.add_parser("continuum", help="disc-layer integrals versus qubit separation")
    _common(p)
    _add(p, "--R", dest="R", type=float, help="disc radius in nm")
    _add(p, "--h", dest="h", type=float, help="disc height in nm")
    _add(p, "--d-max", dest="d_max", type=float)
    _add(p, "--d-step", dest="d_step", type=float)

    p = sub.add_parser("scan-underdetermined", help="low-cost single-TLS fits under a wrong assumption")
    _common(p)
    _add(p, "--mode", choices=("orientation", "magnitude"))
    _add(p, "--height", type=float, help="height of the true TLS in nm")
    _add(p, "--candidate-height", dest="candidate_height", type=float,
         help="height of the candidate plane; defaults to --height in orientation mode and 30 nm in "
              "magnitude mode, since a weaker dipole must sit closer to the sites")
    _add(p, "--true-x", dest="true_x", type=float)
    _add(p, "--true-y", dest="true_y", type=float)
    _add(p, "--true-moment", dest="true_moment", type=float)
    _add(p, "--rate", type=float, help="switching rate of the true TLS in Hz (assumed known)")
    _add(p, "--half-width", dest="half_width", type=float)
    _add(p, "--grid", type=int, help="grid points per lateral axis")
    _add(p, "--threshold", type=float)
    _add(p, "--sigma-rel", dest="sigma_rel", type=float)

    p = sub.add_parser("infer-apsd", help="posterior over hypotheses from auto-spectra")
    _common(p)
    _inference(p, phases=False)

    p = sub.add_parser("infer-cpsd", help="posterior from auto-spectra plus cross-spectrum phases")
    _common(p)
    _inference(p, phases=True)

    p = sub.add_parser("brier-eval", help="Brier scores for one dot, two dots and two samples")
    _common(p)
    _add(p, "--n-seeds", dest="n_seeds", type=int)
    _add(p, "--n-mc", dest="n_mc", type=int)
    _add(p, "--band-k", dest="band_k", type=float)
    _add(p, "--bins-per-decade", dest="bins_per_decade", type=float)
    _freq(p)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command line."""
    cli = vars(args).copy()
    command = cli.pop("command")
    params = dict(COMMON_DEFAULTS, **COMMAND_DEFAULTS[command])
    path = cli.pop("config_file", None)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
        if not isinstance(doc, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = set(doc) - set(params) - {"out_dir"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        params.update(doc)
    params.update(cli)
    params["command"] = command
    return params


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

class Run:
    """Collects outputs and writes them atomically, then the manifest."""

    def __init__(self, params: dict):
        self.params = params
        self.out_dir = Path(params["out_dir"])
        self.outputs: list[Path] = []
        self.started = time.perf_counter()
        self.status = "ok"

    def write(self, name: str, text: str) -> None:
        self.outputs.append(atomic_write(self.out_dir / name, text))

    def manifest(self) -> None:
        params = {k: v for k, v in self.params.items() if k not in ("out_dir", "command")}
        doc = {
            "command": self.params["command"],
            "status": self.status,
            "inputs": params,
            "seeds": {"master": self.params.get("seed")},
            "versions": {
                "tlsnoise": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "wall_time_s": round(time.perf_counter() - self.started, 6),
            "outputs": [{"path": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
                        for p in self.outputs],
        }
        atomic_write(self.out_dir / "run_manifest.json", json_text(doc))


def _layout(params) -> QubitLayout:
    sep = float(params["separation"])
    if not sep > 0:
        raise ValidationError("separation must be positive")
    return QubitLayout.pair(sep)


def _layer(params) -> LayerBox:
    v = params["layer"]
    if len(v) != 6:
        raise ValidationError("layer needs six numbers x0,x1,y0,y1,z0,z1")
    return LayerBox((v[0], v[1]), (v[2], v[3]), (v[4], v[5]))


def _rates(params) -> tuple[float, float]:
    return float(params["rate_min"]), float(params["rate_max"])


def _configuration(params) -> TlsConfiguration:
    if params.get("tls_config"):
        try:
            text = Path(params["tls_config"]).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read TLS configuration: {exc}") from None
        return TlsConfiguration.from_json(text)
    hyp = ModelHypothesis(params["n_tls"], params["ell"], OrientationClass.parse(params["orientation"]),
                          _layer(params), _rates(params), epsilon_r=params["epsilon_r"])
    return sample_configuration(hyp, params["seed"])


def _check_freqs(params) -> None:
    if not 0 < params["f_min"] < params["f_max"]:
        raise ValidationError("need 0 < f_min < f_max")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(params, run: Run) -> None:
    _check_freqs(params)
    config = _configuration(params)
    layout = _layout(params)
    obs = Observable.parse(params["observable"])
    spec = TimeSeriesSpec(params["duration"], params["dt"], params["n_realizations"], params["seed"])
    first = next(iter_qubit_records(config, layout, obs, spec))
    header = ["time_s"] + [f"site_{s}" for s in range(len(layout))]
    run.write("records.csv", csv_text(header, zip(spec.times, *first)))
    est = estimate_from_config(config, layout, obs, spec, pairs=((0, 1),))
    f = est.grid.values
    nr = est.n_realizations
    for s in range(len(layout)):
        apsd = est.site(s).apsd
        run.write(f"apsd_site{s}.csv", csv_text(["frequency_hz", "value", "n_realizations"],
                                                ((fi, v, nr) for fi, v in zip(f, apsd))))
        binned = log_rebin(f, apsd, params["bins_per_decade"], params["f_min"], params["f_max"])
        run.write(f"binned_site{s}.csv", binned_csv(binned))
    pair = est.pair(0, 1)
    rows = zip(f, pair.cpsd.real, pair.cpsd.imag, pair.strength, pair.phase, [nr] * f.size)
    run.write("cpsd_0_1.csv", csv_text(["frequency_hz", "re", "im", "strength", "phase", "n_realizations"], rows))
    run.write("config.json", config.to_json() + "\n")


def cmd_spectra(params, run: Run) -> None:
    _check_freqs(params)
    config = _configuration(params)
    layout = _layout(params)
    obs = Observable.parse(params["observable"])
    grid = FrequencyGrid.log(params["f_min"], params["f_max"], params["n_freq"])
    for s in range(len(layout)):
        run.write(f"apsd_site{s}.csv", apsd_csv(analytic_apsd(config, layout, s, obs, grid)))
    run.write("cpsd_0_1.csv", cpsd_csv(analytic_cpsd(config, layout, 0, 1, obs, grid)))
    run.write("config.json", config.to_json() + "\n")
    if params["ensemble"]:
        template = ModelHypothesis(params["n_tls"], params["ell"], OrientationClass.FULLY_RANDOM,
                                   _layer(params), _rates(params), epsilon_r=params["epsilon_r"])
        stats = orientation_ensemble_stats(template, layout, params["ensemble"], params["seed"], grid,
                                           observable=obs)
        rows = [s.as_row() for s in stats.values()]
        header = list(rows[0])
        run.write("phase_stats.csv", csv_text(header, ([r[k] for k in header] for r in rows)))


def cmd_continuum(params, run: Run) -> None:
    layer = DiscLayer(params["R"], params["h"])
    if not (params["d_max"] >= 0 and params["d_step"] > 0):
        raise ValidationError("need d_max >= 0 and d_step > 0")
    n = int(math.floor(params["d_max"] / params["d_step"] + 1e-9)) + 1
    rows = sweep(layer, np.arange(n) * params["d_step"])
    run.write("continuum_sweep.csv", csv_text(["d_nm", "A_x", "A_y", "A_z", "A_r"], rows))
    try:
        d_c = critical_separation(layer)
    except NoBracket:
        d_c = None
    run.write("critical_separation.json", json_text({"R_nm": params["R"], "h_nm": params["h"], "d_c_nm": d_c}))


def cmd_scan(params, run: Run) -> None:
    layout = _layout(params)
    obs = Observable.parse(params["observable"])
    w = params["half_width"]
    z_c = params["candidate_height"]
    if z_c is None:
        z_c = params["height"] if params["mode"] == "orientation" else 30.0
    if params["mode"] == "orientation":
        true_orient = (0.0, 0.0, 1.0)
        pos = (params["true_x"], params["true_y"], params["height"])
        moments = tuple(params["true_moment"] * f for f in np.geomspace(0.25, 4.0, 9))
        family = ScanFamily(z_c, (-w, w), (-w, w), params["grid"], params["grid"],
                            ScanFamily.horizontal(18), moments)
    else:
        true_orient = (1.0, 0.0, 0.0)
        pos = (params["true_x"], params["true_y"], params["height"])
        family = ScanFamily(z_c, (-w, w), (-w, w), params["grid"], params["grid"],
                            ScanFamily.sphere(9, 18), (params["true_moment"] / 10.0,))
    truth = TlsConfiguration.from_arrays([pos], [true_orient], [params["true_moment"]], [params["rate"]],
                                         params["epsilon_r"])
    points = underdetermination_scan(truth, layout, family, params["threshold"], params["sigma_rel"],
                                     observable=obs)
    rows = ((p.x, p.y, *p.orientation, p.moment, p.cost) for p in points)
    run.write("scan.csv", csv_text(["x_nm", "y_nm", "px", "py", "pz", "moment_e_nm", "cost"], rows))
    run.write("truth.json", truth.to_json() + "\n")


def _read_phases(path) -> tuple[PhaseObservation, ...]:
    import csv as _csv
    out = []
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["frequency_hz", "phase"]:
            raise ParseError("header must be frequency_hz,phase", line=1)
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != 2:
                raise ParseError("expected 2 fields", line=line)
            try:
                f = float(row[0])
                ph = math.pi if row[1].strip().lower() == "pi" else float(row[1])
            except ValueError:
                raise ParseError(f"non-numeric value in {row}", line=line) from None
            if abs(ph) < 1e-6:
                ph = 0.0
            elif abs(ph - math.pi) < 1e-6:
                ph = math.pi
            else:
                raise ParseError("phase must be 0 or pi", line=line)
            out.append(PhaseObservation(f, ph))
    return tuple(out)


def _hypotheses(params) -> list[ModelHypothesis]:
    counts = params["counts"] or geometric_counts()
    lengths = log_lengths(params["ell_center"], params["ell_decades"], params["ell_members"])
    orients = [OrientationClass.parse(o) for o in params["orientation"]]
    return hypothesis_grid(counts, lengths, orients, _layer(params), _rates(params), params["epsilon_r"])


def _measurement(params, with_phases: bool) -> MeasurementSet:
    layout = _layout(params)
    obs = Observable.parse(params["observable"])
    _check_freqs(params)
    if params["psd"]:
        if len(params["psd"]) > len(layout):
            raise ValidationError("more PSD files than qubit sites")
        apsd = {s: ingest_psd(path, params["rebin"], params["bins_per_decade"], params["band_k"],
                              params["f_min"], params["f_max"])
                for s, path in enumerate(params["psd"])}
        phases = ()
        if with_phases:
            if not params.get("phases"):
                raise ValidationError("infer-cpsd with measured data needs --phases")
            phases = _read_phases(params["phases"])
        return MeasurementSet(layout, apsd, phases, obs)
    truth = ModelHypothesis(params["truth_n"], params["truth_ell"],
                            OrientationClass.parse(params["truth_orientation"]),
                            _layer(params), _rates(params), epsilon_r=params["epsilon_r"])
    settings = SyntheticSettings(params["n_realizations"], params["n_samples"], params["dt"], params["f_min"],
                                 params["f_max"], params["bins_per_decade"], params["band_k"],
                                 params.get("phase_min_strength", 0.3))
    config = sample_configuration(truth, params["seed"])
    return synthetic_measurement(config, layout, params["seed"], settings, with_phases=with_phases,
                                 observable=obs)


def heatmap_svg(counts, lengths, marginal: np.ndarray, cell: int = 24) -> str:
    """Grey-scale SVG of P(n_T, ell): rows are counts (bottom = smallest), columns lengths."""
    rows, cols = marginal.shape
    peak = float(marginal.max()) or 1.0
    left, top = 60, 10
    width, height = left + cols * cell + 10, top + rows * cell + 40
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    for i in range(rows):
        y = top + (rows - 1 - i) * cell
        parts.append(f'<text x="{left - 4}" y="{y + cell * 0.7:.1f}" font-size="10" text-anchor="end">'
                     f'{counts[i]}</text>')
        for j in range(cols):
            level = int(round(255 * (1 - marginal[i, j] / peak)))
            parts.append(f'<rect x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="rgb({level},{level},{level})"/>')
    for j in range(cols):
        x = left + j * cell + cell / 2
        parts.append(f'<text x="{x:.1f}" y="{top + rows * cell + 14}" font-size="8" text-anchor="middle">'
                     f'{lengths[j]:.3g}</text>')
    parts.append(f'<text x="{left + cols * cell / 2:.1f}" y="{height - 6}" font-size="10" '
                 f'text-anchor="middle">dipole length (nm)</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_infer(params, run: Run, with_phases: bool) -> None:
    if params["n_mc"] < 1:
        raise ValidationError("n_mc must be >= 1")
    hyps = _hypotheses(params)
    meas = _measurement(params, with_phases)
    for s, b in meas.apsd.items():
        run.write(f"measurement_site{s}.csv", binned_csv(b))
    if with_phases:
        run.write("measurement_phases.csv",
                  csv_text(["frequency_hz", "phase"], ((p.f_center, p.phase) for p in meas.phases)))
    table = sweep_posterior(hyps, meas, params["n_mc"], params["seed"])
    run.write("posterior.json", table.to_json() + "\n")
    run.write("posterior.csv", table.to_csv())
    ex = expectations(table)
    grid_rows = ((n, l, ex.marginal[i, j]) for i, n in enumerate(ex.counts) for j, l in enumerate(ex.lengths))
    run.write("marginal.csv", csv_text(["n_tls", "ell_nm", "probability"], grid_rows))
    summary = {
        "warning": COMPLETENESS_WARNING,
        "mean_n_tls": ex.mean_n_tls,
        "mean_ell_nm": ex.mean_ell,
        "by_orientation": {o.value: v for o, v in ex.by_orientation.items()},
        "mode": table.mode().to_dict(),
    }
    try:
        area = hyps[0].area_nm2()
        summary["mean_areal_density_cm2"] = ex.mean_n_tls / (area * 1e-14)
    except ValidationError:
        pass
    run.write("expectations.json", json_text(summary))
    if params["svg"]:
        run.write("marginal.svg", heatmap_svg(ex.counts, ex.lengths, ex.marginal))
    print(COMPLETENESS_WARNING, file=sys.stderr)


def cmd_brier(params, run: Run) -> None:
    _check_freqs(params)
    settings = SyntheticSettings(f_min=params["f_min"], f_max=params["f_max"],
                                 bins_per_decade=params["bins_per_decade"], band_k=params["band_k"])
    protocol = BrierProtocol(n_mc=params["n_mc"], separation=params["separation"],
                             rate_interval=_rates(params), settings=settings)
    results = [run_brier_protocol(protocol, params["seed"] + i) for i in range(params["n_seeds"])]
    run.write("brier.csv", csv_text(["seed", "one_dot", "two_dots", "two_samples"],
                                    ((r.seed, r.one_dot, r.two_dots, r.two_samples) for r in results)))
    med = {k: float(np.median([getattr(r, k) for r in results])) for k in ("one_dot", "two_dots", "two_samples")}
    med["ordering_holds"] = med["two_samples"] < med["two_dots"] < med["one_dot"]
    run.write("brier_summary.json", json_text(med))


COMMANDS = {
    "simulate": cmd_simulate,
    "spectra": cmd_spectra,
    "continuum": cmd_continuum,
    "scan-underdetermined": cmd_scan,
    "infer-apsd": lambda p, r: cmd_infer(p, r, False),
    "infer-cpsd": lambda p, r: cmd_infer(p, r, True),
    "brier-eval": cmd_brier,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = resolve(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run = Run(params)
    code = 0
    try:
        COMMANDS[params["command"]](params, run)
    except AllRejected as exc:
        print(f"all hypotheses rejected: {exc}", file=sys.stderr)
        run.status, code = "all_rejected", 3
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.status, code = "invalid_input", 2
    except TlsNoiseError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        run.status, code = "numerical_failure", 1
    run.manifest()
    return code


if __name__ == "__main__":
    sys.exit(main())
