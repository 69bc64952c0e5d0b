"""Command-line interface.

Each subcommand reads and writes the same CSV/JSON formats as the pipeline,
so stages can be chained through files::

    tmlregime ingest raw.csv --output clean.csv
    tmlregime deseasonalize clean.csv --output des.csv --params-out seasonality.json
    tmlregime calibrate des.csv --output tml_fit.json --regimes-out regimes.csv
    tmlregime fitdist des.csv --column residual --output fits.json
    tmlregime gof des.csv --column residual --fits fits.json
    tmlregime simulate --model tml_fit.json --seasonality seasonality.json --output paths.csv
    tmlregime indices paths.csv --kind GDD --tau1 1 --tau2 90 --t-optimal 27
    tmlregime report out/report.json --table 8
    tmlregime pipeline --config config.json

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
failure, 4 file I/O error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import os
import sys
from pathlib import Path

import numpy as np
from scipy import stats as sps

from . import __version__
from .errors import DataIOError, TMLError, ValidationError
from .ghdist import FAMILIES, FitOptions, GHParams, cdf, fit_mle, fit_normal
from .indices import IndexSpec, compute_index, index_distribution
from .ingest import TemperatureSeries, descriptive_stats, fill_missing, load_station_csv, write_station_csv
from .io import dumps_json, read_json, write_csv, write_json
from .pipeline import OUTPUT_ENV, PipelineConfig, run_pipeline
from .regime import EMConfig, RegimeModel, classify_regimes, em_calibrate
from .regime.model import LEVEL_FLOOR
from .report import render_tables
from .seasonal import MODES, SeasonalParams, fit_seasonal, seasonal_value, to_amplitude_phase, deseasonalize
from .simulate import SimulationSpec, simulate_paths
from .stats import (anderson_darling, engle_arch, hurst_rs, jarque_bera, kolmogorov_smirnov,
                    pearson_chi2_normal)

DEFAULT_OUTPUT_DIR = "tml_output"


def _read_table(path) -> dict:
    """CSV file as ``{column: list of raw strings}``."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ValidationError(f"{path} is empty")
            cols = {name: [] for name in reader.fieldnames}
            for row in reader:
                for name in reader.fieldnames:
                    cols[name].append(row[name])
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    return cols


def _column(table: dict, name: str, path) -> np.ndarray:
    if name not in table:
        raise ValidationError(f"{path} has no column {name!r}; columns are {list(table)}")
    try:
        return np.array([float(v) if v != "" else np.nan for v in table[name]])
    except ValueError as exc:
        raise ValidationError(f"column {name!r} of {path} is not numeric: {exc}") from exc


def _emit(obj, output) -> None:
    if output:
        write_json(output, obj)
    else:
        sys.stdout.write(dumps_json(obj))


def _section(doc: dict, key: str, station: str | None):
    """Pull ``key`` from a stage file or from one station of a full report."""
    if key in doc:
        return doc[key]
    stations = doc.get("stations")
    if stations:
        if station is None:
            if len(stations) != 1:
                raise ValidationError(f"report has stations {sorted(stations)}; pick one with --station")
            station = next(iter(stations))
        if station not in stations:
            raise ValidationError(f"report has no station {station!r}")
        if key in stations[station]:
            return stations[station][key]
    raise ValidationError(f"no '{key}' section found")


def _load_series(path, station, fill: bool) -> TemperatureSeries:
    series = load_station_csv(path, station)
    return fill_missing(series) if fill else series


# --- subcommands -----------------------------------------------------------


def cmd_ingest(args) -> int:
    series = _load_series(args.input, args.station, not args.no_fill)
    if args.output:
        write_station_csv(series, args.output)
    summary = {"station": series.station_id, "start_date": series.start_date.isoformat(),
               "n_days": len(series), "n_missing": series.n_missing,
               "n_filled": int(series.filled.sum()) if series.filled is not None else 0}
    if series.is_complete:
        summary["descriptive_stats"] = descriptive_stats(series).as_dict()
    _emit(summary, args.stats_out)
    return 0


def cmd_deseasonalize(args) -> int:
    series = _load_series(args.input, args.station, not args.no_fill)
    raw = fit_seasonal(series)
    params = to_amplitude_phase(raw, series.start_date)
    des = deseasonalize(series, params, args.mode)
    curve = seasonal_value(params, np.arange(1, len(series) + 1))
    residual = series.values - curve
    rows = ((d.isoformat(), series.values[i], curve[i], des.values[i], residual[i])
            for i, d in enumerate(series.dates))
    write_csv(args.output, ["date", "dat", "seasonal", "deseasonalized", "residual"], rows)
    doc = {"seasonality": {"origin": series.start_date.isoformat(), "mode": args.mode,
                           "raw": {"a0": raw.a0, "a1": raw.a1, "a2": raw.a2, "a3": raw.a3},
                           "normalized": params.normalized().as_dict(),
                           "paper_convention": params.paper_convention().as_dict()}}
    _emit(doc, args.params_out)
    return 0


def cmd_calibrate(args) -> int:
    table = _read_table(args.input)
    x = _column(table, args.column, args.input)
    config = EMConfig(tol=args.tol, max_iter=args.max_iter, level_floor=args.level_floor,
                      level_policy=args.level_policy, n_starts=args.n_starts, seed=args.seed,
                      initial_probs=args.initial_probs)
    res = em_calibrate(x, config=config)
    labels = classify_regimes(res.smoothed, args.threshold)
    doc = {"tml_fit": {"params": res.model.as_dict(), "loglik": res.loglik, "converged": res.converged,
                       "iterations": res.iterations, "n_floored": res.n_floored,
                       "level_floor": args.level_floor, "threshold": args.threshold,
                       "n_extreme_days": int(np.sum(labels == "extreme")),
                       "trace": [{"iteration": r["iteration"], "loglik": r["loglik"], **r["params"]}
                                 for r in res.trace]}}
    if args.regimes_out:
        dates = table.get("date") or [str(i + 1) for i in range(x.size)]
        write_csv(args.regimes_out, ["date", "prob_extreme", "label"],
                  ((dates[i], res.smoothed[i, 1], labels[i]) for i in range(x.size)))
    _emit(doc, args.output)
    return 0


def cmd_fitdist(args) -> int:
    x = _column(_read_table(args.input), args.column, args.input)
    options = FitOptions(n_starts=args.n_starts)
    fits = {}
    for f in args.families:
        fr = fit_normal(x) if f == "Normal" else fit_mle(x, f, options)
        fits[f] = fr.as_dict()
    _emit({"distribution_fits": fits}, args.output)
    return 0


def cmd_gof(args) -> int:
    x = _column(_read_table(args.input), args.column, args.input)
    mu, sd = float(x.mean()), float(x.std())
    normal_cdf = lambda v: sps.norm.cdf(v, loc=mu, scale=sd)  # noqa: E731
    doc = {
        "normality_tests": {"chi2": pearson_chi2_normal(x, args.chi2_bins).as_dict(),
                            "jarque_bera": jarque_bera(x).as_dict(),
                            "anderson_darling": anderson_darling(x, normal_cdf, fitted=True).as_dict()},
        "arch_test": engle_arch(x, args.engle_lags).as_dict(),
        "hurst": hurst_rs(x).as_dict(),
    }
    if args.fits:
        fits = _section(read_json(args.fits), "distribution_fits", args.station)
        gof = {}
        for fam, rec in fits.items():
            p = GHParams.from_dict(rec["params"])
            F = lambda v, p=p: cdf(p, v)  # noqa: E731
            gof[fam] = {"kolmogorov_smirnov": kolmogorov_smirnov(x, F, fitted=True).as_dict(),
                        "anderson_darling": anderson_darling(x, F, fitted=True).as_dict()}
        doc["distribution_gof"] = gof
    _emit(doc, args.output)
    return 0


def cmd_simulate(args) -> int:
    model = RegimeModel.from_dict(_section(read_json(args.model), "tml_fit", args.station)["params"])
    seasonal = None
    if args.seasonality:
        s = _section(read_json(args.seasonality), "seasonality", args.station)
        n = s["normalized"]
        seasonal = SeasonalParams(n["A0"], n["A1"], n["A2"], n["phi"], dt.date.fromisoformat(s["origin"]))
    innovation = None
    if args.innovation != "gaussian":
        if not args.fits:
            raise ValidationError("a non-Gaussian innovation needs --fits")
        fits = _section(read_json(args.fits), "distribution_fits", args.station)
        if args.innovation not in fits:
            raise ValidationError(f"--fits has no {args.innovation} fit")
        innovation = GHParams.from_dict(fits[args.innovation]["params"])
    spec = SimulationSpec(model, args.n_days, args.n_paths, args.seed, args.initial_value, seasonal, args.mode,
                          innovation, start_day=args.start_day, allow_unstable=args.allow_unstable)
    res = simulate_paths(spec)
    write_csv(args.output, ["path_id", "day", "regime", "t_tilde", "temperature"], res.rows())
    return 0


def cmd_indices(args) -> int:
    spec = IndexSpec(args.kind, args.tau1, args.tau2, args.t_optimal)
    table = _read_table(args.input)
    if "path_id" in table:
        ids = np.array([int(v) for v in table["path_id"]])
        values = _column(table, args.column or "temperature", args.input)
        n_paths = int(ids.max()) + 1
        paths = values.reshape(n_paths, -1)
        doc = {"indices": [{"spec": spec.as_dict(), "label": spec.label,
                            "simulated": index_distribution(paths, spec).as_dict()}]}
    else:
        values = _column(table, args.column or "tavg", args.input)
        doc = {"indices": [{"spec": spec.as_dict(), "label": spec.label,
                            "observed": {"value": float(compute_index(values, spec))}}]}
    _emit(doc, args.output)
    return 0


def cmd_report(args) -> int:
    sys.stdout.write(render_tables(read_json(args.input), args.table))
    return 0


def cmd_pipeline(args) -> int:
    config = PipelineConfig.from_file(args.config)
    if args.seed is not None or args.workers is not None:
        import dataclasses
        changes = {k: v for k, v in (("seed", args.seed), ("workers", args.workers)) if v is not None}
        config = dataclasses.replace(config, **changes)
    out = args.output_dir or config.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_DIR
    if config.output_dir and not args.output_dir and not Path(config.output_dir).is_absolute():
        out = str(Path(config.base_dir) / config.output_dir)
    report = run_pipeline(config, out)
    sys.stdout.write(f"wrote {Path(out) / 'report.json'} ({len(report['stations'])} station(s))\n")
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tmlregime", description="Two-regime temperature model toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a station CSV, fill gaps, write the normalized CSV")
    p.add_argument("input", help="station CSV with header date,tmax,tmin")
    p.add_argument("--station", help="station id (default: file stem)")
    p.add_argument("--output", help="normalized CSV with a tavg column")
    p.add_argument("--stats-out", help="JSON summary path (default: stdout)")
    p.add_argument("--no-fill", action="store_true", help="keep gaps instead of filling them")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("deseasonalize", help="fit the seasonal curve and remove it")
    p.add_argument("input", help="station CSV")
    p.add_argument("--station")
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--output", required=True, help="CSV date,dat,seasonal,deseasonalized,residual")
    p.add_argument("--params-out", help="seasonality JSON (default: stdout)")
    p.add_argument("--no-fill", action="store_true")
    p.set_defaults(func=cmd_deseasonalize)

    p = sub.add_parser("calibrate", help="EM calibration of the regime model")
    p.add_argument("input", help="CSV holding the deseasonalized series")
    p.add_argument("--column", default="deseasonalized")
    p.add_argument("--output", help="tml_fit JSON (default: stdout)")
    p.add_argument("--regimes-out", help="CSV date,prob_extreme,label")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--n-starts", type=int, default=1)
    p.add_argument("--level-floor", type=float, default=LEVEL_FLOOR)
    p.add_argument("--level-policy", choices=("floor", "error"), default="floor")
    p.add_argument("--initial-probs", choices=("estimate", "stationary"), default="estimate")
    p.add_argument("--threshold", type=float, default=0.8, help="P(extreme) cut for labels")
    p.add_argument("--seed", type=int, default=0, help="seed for jittered multi-starts")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fitdist", help="maximum likelihood fits of GH-family laws")
    p.add_argument("input", help="CSV holding the sample")
    p.add_argument("--column", default="residual")
    p.add_argument("--families", nargs="+", choices=FAMILIES, default=["Normal", "HYP", "GH", "NIG", "VG"])
    p.add_argument("--n-starts", type=int, default=8)
    p.add_argument("--output")
    p.set_defaults(func=cmd_fitdist)

    p = sub.add_parser("gof", help="normality, ARCH and Hurst diagnostics; K-S and A-D against fits")
    p.add_argument("input")
    p.add_argument("--column", default="residual")
    p.add_argument("--fits", help="distribution_fits JSON or report")
    p.add_argument("--station", help="station to read from a multi-station report")
    p.add_argument("--engle-lags", type=int, default=12)
    p.add_argument("--chi2-bins", type=int, default=50)
    p.add_argument("--output")
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("simulate", help="Monte Carlo paths from a calibrated model")
    p.add_argument("--model", required=True, help="tml_fit JSON or report")
    p.add_argument("--seasonality", help="seasonality JSON or report; omit for deseasonalized paths only")
    p.add_argument("--fits", help="distribution_fits JSON or report (for --innovation)")
    p.add_argument("--station")
    p.add_argument("--innovation", default="gaussian", choices=("gaussian",) + FAMILIES)
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--n-days", type=int, default=365)
    p.add_argument("--n-paths", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-value", type=float, default=0.0)
    p.add_argument("--start-day", type=int, default=1, help="seasonal day index of the first simulated day")
    p.add_argument("--allow-unstable", action="store_true", help="simulate even when |1 + kappa| >= 1")
    p.add_argument("--output", required=True, help="CSV path_id,day,regime,t_tilde,temperature")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("indices", help="CAT or GDD on a station CSV or a paths CSV")
    p.add_argument("input")
    p.add_argument("--kind", choices=("CAT", "GDD"), required=True)
    p.add_argument("--tau1", type=int, required=True, help="first day (1-based, inclusive)")
    p.add_argument("--tau2", type=int, required=True, help="last day (inclusive)")
    p.add_argument("--t-optimal", type=float, help="GDD threshold (required for GDD)")
    p.add_argument("--column", help="value column (default tavg, or temperature for paths)")
    p.add_argument("--output")
    p.set_defaults(func=cmd_indices)

    p = sub.add_parser("report", help="render report tables")
    p.add_argument("input", help="report.json")
    p.add_argument("--table", default="all", help="all, 6, 7, 8, 9 or a section name")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="run every stage for the stations in a config file")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--output-dir", help=f"output directory (default: config, then ${OUTPUT_ENV}, "
                                        f"then ./{DEFAULT_OUTPUT_DIR})")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="stations processed concurrently")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TMLError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
