"""End-to-end station workflow: load, fill, deseasonalize, diagnose, calibrate,
fit residual laws, test the fits, simulate and compute indices.

:func:`run_pipeline` is a pure function of the input files, the
configuration and the seed: the report carries no timestamps or absolute
paths, floats are written at full binary precision, and stations are merged
in input order whatever the worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy import stats as sps

from . import __version__
from .errors import DataIOError, NumericalError, StageError, TMLError, ValidationError
from .ghdist import FAMILIES, FitOptions, cdf, fit_mle, fit_normal, pdf
from .indices import IndexSpec, compute_index, index_distribution
from .ingest import TemperatureSeries, descriptive_stats, fill_missing, load_station_csv
from .io import dumps_json, to_jsonable, write_csv, write_json
from .regime import EMConfig, classify_regimes, em_calibrate, extract_regime_residuals
from .regime.model import LEVEL_FLOOR
from .seasonal import MODES, PERIOD_DAYS, fit_seasonal, seasonal_value, to_amplitude_phase, deseasonalize
from .simulate import SimulationSpec, simulate_paths
from .stats import (anderson_darling, engle_arch, hurst_rs, jarque_bera, kolmogorov_smirnov,
                    pearson_chi2_normal)

SCHEMA_VERSION = 1
FIT_SAMPLES = ("residuals", "pooled", "shifted")
OUTPUT_ENV = "TMLREGIME_OUTPUT_DIR"


def _take(d: dict, allowed: set, where: str) -> dict:
    if not isinstance(d, dict):
        raise ValidationError(f"{where} must be a JSON object")
    unknown = set(d) - allowed
    if unknown:
        raise ValidationError(f"unknown {where} setting(s): {', '.join(sorted(unknown))}")
    return d


def _fields(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


@dataclass(frozen=True)
class StationInput:
    path: str
    station_id: str | None = None

    @property
    def name(self) -> str:
        return self.station_id or Path(self.path).stem


@dataclass(frozen=True)
class EMSettings:
    tol: float = 1e-6
    max_iter: int = 500
    n_starts: int = 1
    level_floor: float = LEVEL_FLOOR
    level_policy: str = "floor"
    initial_probs: str = "estimate"
    threshold: float = 0.8

    def __post_init__(self):
        if not (self.tol > 0 and self.max_iter >= 1 and self.n_starts >= 1 and self.level_floor > 0):
            raise ValidationError("EM settings need tol > 0, max_iter >= 1, n_starts >= 1, level_floor > 0")
        if self.level_policy not in ("floor", "error"):
            raise ValidationError(f"level_policy must be 'floor' or 'error', got {self.level_policy!r}")
        if self.initial_probs not in ("estimate", "stationary"):
            raise ValidationError(f"initial_probs must be 'estimate' or 'stationary', got {self.initial_probs!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError("regime threshold must lie in (0, 1)")


@dataclass(frozen=True)
class FitSettings:
    families: tuple = ("Normal", "HYP", "GH", "NIG", "VG")
    sample: str = "residuals"
    n_starts: int = 8

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        bad = [f for f in self.families if f not in FAMILIES]
        if bad:
            raise ValidationError(f"unknown distribution families {bad}; expected some of {FAMILIES}")
        if self.sample not in FIT_SAMPLES:
            raise ValidationError(f"fit sample must be one of {FIT_SAMPLES}, got {self.sample!r}")
        if self.n_starts < 1:
            raise ValidationError("n_starts must be at least 1")


@dataclass(frozen=True)
class TestSettings:
    engle_lags: int = 12
    chi2_bins: int = 50
    hurst_min_window: int = 16

    __test__ = False

    def __post_init__(self):
        if self.engle_lags < 1 or self.chi2_bins < 4 or self.hurst_min_window < 2:
            raise ValidationError("test settings need engle_lags >= 1, chi2_bins >= 4, hurst_min_window >= 2")


@dataclass(frozen=True)
class SimulationSettings:
    n_paths: int = 100
    n_days: int = 365
    innovation: str = "gaussian"
    allow_unstable: bool = False

    def __post_init__(self):
        if self.n_paths < 1 or self.n_days < 1:
            raise ValidationError("simulation needs n_paths >= 1 and n_days >= 1")
        if self.innovation != "gaussian" and self.innovation not in FAMILIES:
            raise ValidationError(f"innovation must be 'gaussian' or a fitted family, got {self.innovation!r}")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline run depends on.

    Relative input paths are resolved against ``base_dir`` (the directory of
    the config file when loaded with :meth:`from_file`).
    """

    inputs: tuple
    deseasonalize_mode: str = "full"
    fill_missing: bool = True
    em: EMSettings = field(default_factory=EMSettings)
    fits: FitSettings = field(default_factory=FitSettings)
    tests: TestSettings = field(default_factory=TestSettings)
    indices: tuple = ()
    simulation: SimulationSettings | None = None
    output_dir: str | None = None
    seed: int = 0
    workers: int = 1
    base_dir: str = "."

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "indices", tuple(self.indices))
        if not self.inputs:
            raise ValidationError("config lists no input files")
        names = [s.name for s in self.inputs]
        if len(set(names)) != len(names):
            raise ValidationError(f"station ids must be unique, got {names}")
        if self.deseasonalize_mode not in MODES:
            raise ValidationError(f"deseasonalize_mode must be one of {MODES}")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")
        if self.simulation is not None and self.simulation.innovation not in ("gaussian",) + self.fits.families:
            raise ValidationError(f"simulation innovation {self.simulation.innovation!r} is not among the fitted families")

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "PipelineConfig":
        d = dict(_take(d, _fields(cls) - {"base_dir"}, "config"))
        if "inputs" not in d:
            raise ValidationError("config needs an 'inputs' list")
        inputs = []
        for item in d.pop("inputs"):
            if isinstance(item, str):
                inputs.append(StationInput(item))
            else:
                inputs.append(StationInput(**_take(item, _fields(StationInput), "input")))
        d["em"] = EMSettings(**_take(d.get("em", {}), _fields(EMSettings), "em"))
        d["fits"] = FitSettings(**_take(d.get("fits", {}), _fields(FitSettings), "fits"))
        d["tests"] = TestSettings(**_take(d.get("tests", {}), _fields(TestSettings), "tests"))
        d["indices"] = tuple(IndexSpec(**_take(s, _fields(IndexSpec), "index")) for s in d.get("indices", ()))
        sim = d.get("simulation")
        d["simulation"] = None if sim is None else SimulationSettings(
            **_take(sim, _fields(SimulationSettings), "simulation"))
        return cls(inputs=inputs, base_dir=str(base_dir), **d)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataIOError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(d, path.parent)

    def resolve(self, station: StationInput) -> Path:
        p = Path(station.path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def validate_files(self) -> None:
        missing = [str(self.resolve(s)) for s in self.inputs if not self.resolve(s).is_file()]
        if missing:
            raise ValidationError(f"input file(s) not found: {', '.join(missing)}")

    def snapshot(self) -> dict:
        """Result-relevant settings; output location, worker count and base directory are excluded."""
        d = dataclasses.asdict(self)
        for key in ("output_dir", "workers", "base_dir"):
            d.pop(key)
        return to_jsonable(d)

    def config_hash(self) -> str:
        return hashlib.sha256(dumps_json(self.snapshot()).encode("utf-8")).hexdigest()


def station_seed(seed: int, index: int) -> int:
    """Independent per-station seed derived from the run seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


class _Stages:
    """Runs named stages, tagging failures and keeping completed sections."""

    def __init__(self, station: str, section: dict):
        self.station = station
        self.section = section

    def run(self, name: str, fn, hint: str = ""):
        try:
            return fn()
        except StageError:
            raise
        except TMLError as exc:
            raise StageError(name, self.station, exc, hint) from exc
        except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
            raise StageError(name, self.station, NumericalError(str(exc)), hint) from exc
        except OSError as exc:
            raise StageError(name, self.station, DataIOError(str(exc)), hint) from exc


def _table7_record(fit, family: str, sample: str) -> dict:
    p = fit.params
    values = {"nu": p.nu, "alpha": p.alpha, "beta": p.beta, "mu": p.mu, "delta": p.delta}
    if family in ("NIG", "HYP"):
        values["nu"] = None  # fixed by the family
    if family == "Normal":
        values.update(nu=None, alpha=None, beta=None)
    not_applicable = sorted(k for k, v in values.items() if v is None or (isinstance(v, float) and math.isnan(v)))
    rec = {**fit.as_dict(), "table7": values, "sample": sample, "operation": "tmlregime.ghdist.fit_mle"}
    if not_applicable:
        rec["null_reason"] = {k: "not a free parameter of this family" for k in not_applicable}
    if family == "Normal":
        rec["operation"] = "tmlregime.ghdist.fit_normal"
    return rec


def _fit_sample(setting: str, residuals: np.ndarray, regime_res, threshold: float) -> np.ndarray:
    if setting == "residuals":
        return residuals
    if setting == "pooled":
        return regime_res.pooled
    return regime_res.classified(2, threshold)


def _plot_rows_histogram(x: np.ndarray, fits: dict, bins: int = 40):
    counts, edges = np.histogram(x, bins=bins)
    width = edges[1] - edges[0]
    mids = 0.5 * (edges[:-1] + edges[1:])
    density = counts / (x.size * width)
    families = sorted(fits)
    rows = []
    for i in range(bins):
        rows.append([edges[i], edges[i + 1], int(counts[i]), density[i]]
                    + [float(pdf(fits[f].params, mids[i])) for f in families])
    return ["bin_left", "bin_right", "count", "density"] + [f"pdf_{f}" for f in families], rows


def _plot_rows_qq(x: np.ndarray):
    xs = np.sort(x)
    n = xs.size
    theo = sps.norm.ppf((np.arange(1, n + 1) - 0.5) / n, loc=xs.mean(), scale=xs.std(ddof=1))
    return ["theoretical_normal", "sample"], [[a, b] for a, b in zip(theo, xs)]


def _plot_rows_densities(x: np.ndarray, fits: dict, n_grid: int = 201):
    grid = np.linspace(x.min(), x.max(), n_grid)
    families = sorted(fits)
    cols = [np.asarray(pdf(fits[f].params, grid)) for f in families]
    return ["x"] + [f"pdf_{f}" for f in families], [[grid[i]] + [c[i] for c in cols] for i in range(n_grid)]


def _observed_index(series: TemperatureSeries, spec: IndexSpec) -> dict:
    if spec.tau2 > len(series) or spec.tau1 < 1:
        return {"value": None, "null_reason": f"period [{spec.tau1}, {spec.tau2}] is outside the observed "
                                              f"days [1, {len(series)}]"}
    return {"value": float(compute_index(series, spec))}


def run_station(config: PipelineConfig, index: int, out_dir: Path | None) -> dict:
    """Process one station and return its report section; artifacts go to ``out_dir/<station>``."""
    station = config.inputs[index]
    name = station.name
    section: dict = {}
    st = _Stages(name, section)
    artifacts: dict = {}
    sdir = out_dir / name if out_dir is not None else None

    raw_series = st.run("ingest", lambda: load_station_csv(config.resolve(station), name),
                        "check the CSV header date,tmax,tmin and the row reported above")
    series = raw_series
    if config.fill_missing:
        series = st.run("fill", lambda: fill_missing(raw_series),
                        "gaps need 7 observed days on each side and an earlier year at the same date")
    elif not raw_series.is_complete:
        raise StageError("fill", name, ValidationError(f"{raw_series.n_missing} missing day(s) and fill_missing "
                                                       "is off"), "enable fill_missing")
    filled = series.filled if series.filled is not None else np.zeros(len(series), dtype=bool)
    dates = series.dates
    section["data"] = {
        "start_date": series.start_date.isoformat(), "end_date": series.end_date.isoformat(),
        "n_days": len(series), "n_missing": raw_series.n_missing, "n_filled": int(filled.sum()),
        "filled_dates": [d.isoformat() for d, f in zip(dates, filled) if f],
    }

    def dat_stats():
        desc = descriptive_stats(series.values).as_dict()
        chi = pearson_chi2_normal(series.values, config.tests.chi2_bins)
        hurst = hurst_rs(series.values, config.tests.hurst_min_window)
        return {**desc, "chi2": chi.as_dict(), "hurst": hurst.hurst,
                "operation": "tmlregime.ingest.descriptive_stats"}

    section["descriptive_stats"] = st.run("descriptive", dat_stats)

    def seasonality():
        raw = fit_seasonal(series)
        params = to_amplitude_phase(raw, series.start_date)
        return raw, params, deseasonalize(series, params, config.deseasonalize_mode)

    raw, sparams, des = st.run("seasonality", seasonality)
    t = np.arange(1, len(series) + 1)
    seasonal_curve = seasonal_value(sparams, t)
    residuals = series.values - seasonal_curve
    section["seasonality"] = {
        "origin": series.start_date.isoformat(), "period_days": PERIOD_DAYS, "mode": config.deseasonalize_mode,
        "raw": {"a0": raw.a0, "a1": raw.a1, "a2": raw.a2, "a3": raw.a3,
                "residual_sum_squares": raw.residual_sum_squares},
        "normalized": sparams.normalized().as_dict(), "paper_convention": sparams.paper_convention().as_dict(),
        "operation": "tmlregime.seasonal.fit_seasonal",
    }

    def diagnostics():
        desc = descriptive_stats(residuals).as_dict()
        h_res = hurst_rs(residuals, config.tests.hurst_min_window)
        h_dat = hurst_rs(series.values, config.tests.hurst_min_window)
        mu, sd = float(residuals.mean()), float(residuals.std())
        normal_cdf = lambda v: sps.norm.cdf(v, loc=mu, scale=sd)  # noqa: E731
        tests = {
            "chi2": pearson_chi2_normal(residuals, config.tests.chi2_bins).as_dict(),
            "jarque_bera": jarque_bera(residuals).as_dict(),
            "anderson_darling": anderson_darling(residuals, normal_cdf, fitted=True).as_dict(),
            "sample": "residuals",
        }
        arch = {**engle_arch(residuals, config.tests.engle_lags).as_dict(), "sample": "residuals"}
        hurst = {"dat": h_dat.as_dict(), "residuals": h_res.as_dict()}
        return {**desc, "hurst": h_res.hurst, "operation": "tmlregime.ingest.descriptive_stats"}, tests, arch, hurst

    (section["residual_stats"], section["normality_tests"], section["arch_test"],
     section["hurst"]) = st.run("diagnostics", diagnostics)

    em_cfg = EMConfig(tol=config.em.tol, max_iter=config.em.max_iter, level_floor=config.em.level_floor,
                      level_policy=config.em.level_policy, n_starts=config.em.n_starts,
                      seed=station_seed(config.seed, index), initial_probs=config.em.initial_probs)
    em = st.run("calibrate", lambda: em_calibrate(des.values, config=em_cfg),
                "try n_starts > 1, the other deseasonalize_mode, or level_policy 'floor'")
    labels = classify_regimes(em.smoothed, config.em.threshold)
    section["tml_fit"] = {
        "params": em.model.as_dict(), "loglik": em.loglik, "converged": em.converged,
        "iterations": em.iterations, "n_floored": em.n_floored, "level_floor": config.em.level_floor,
        "level_policy": config.em.level_policy, "mode": config.deseasonalize_mode,
        "init_probs": em.init_probs, "starts_tried": em.starts_tried, "start_index": em.start_index,
        "threshold": config.em.threshold, "n_extreme_days": int(np.sum(labels == "extreme")),
        "trace": [{"iteration": r["iteration"], "loglik": r["loglik"], **r["params"]} for r in em.trace],
        "operation": "tmlregime.regime.em_calibrate",
    }
    regime_res = extract_regime_residuals(des.values, em.model, em.smoothed, config.em.level_floor)

    sample = _fit_sample(config.fits.sample, residuals, regime_res, 0.5)
    options = FitOptions(n_starts=config.fits.n_starts)

    def fits():
        return {f: (fit_normal(sample) if f == "Normal" else fit_mle(sample, f, options))
                for f in config.fits.families}

    fitted = st.run("fitdist", fits, "reduce the family list or check the residual sample size (>= 50)")
    section["distribution_fits"] = {f: _table7_record(fitted[f], f, config.fits.sample) for f in fitted}

    def gof():
        out = {}
        for f, fr in fitted.items():
            F = lambda v, p=fr.params: cdf(p, v)  # noqa: E731
            out[f] = {"kolmogorov_smirnov": kolmogorov_smirnov(sample, F, fitted=True).as_dict(),
                      "anderson_darling": anderson_darling(sample, F, fitted=True).as_dict()}
        return out

    section["distribution_gof"] = st.run("gof", gof)

    sim = None
    if config.simulation is not None:
        s = config.simulation
        innovation = None if s.innovation == "gaussian" else fitted[s.innovation].params
        spec = SimulationSpec(em.model, s.n_days, s.n_paths, station_seed(config.seed, index) ^ 0x5EED,
                              float(des.values[-1]), sparams, config.deseasonalize_mode, innovation,
                              start_day=len(series) + 1, allow_unstable=s.allow_unstable)
        sim = st.run("simulate", lambda: simulate_paths(spec),
                     "set simulation.allow_unstable to simulate an explosive base regime")
        section["simulation"] = {"seed": spec.seed, "n_paths": s.n_paths, "n_days": s.n_days,
                                 "innovation": s.innovation, "initial_value": spec.initial_value,
                                 "start_day": spec.start_day, "operation": "tmlregime.simulate.simulate_paths"}

    def indices():
        out = []
        for spec in config.indices:
            rec = {"spec": spec.as_dict(), "label": spec.label, "observed": _observed_index(series, spec)}
            if sim is not None:
                if spec.tau2 <= sim.temperature.shape[1]:
                    rec["simulated"] = index_distribution(sim.temperature, spec).as_dict()
                else:
                    rec["simulated"] = {"value": None, "null_reason": "period exceeds the simulated horizon"}
            out.append(rec)
        return out

    section["indices"] = st.run("indices", indices)

    if sdir is not None:
        def write():
            iso = [d.isoformat() for d in dates]
            write_csv(sdir / "residuals.csv",
                      ["date", "dat", "seasonal", "deseasonalized", "residual", "residual_squared", "filled"],
                      ([iso[i], series.values[i], seasonal_curve[i], des.values[i], residuals[i],
                        residuals[i] ** 2, int(filled[i])] for i in range(len(series))))
            write_csv(sdir / "regimes.csv", ["date", "prob_extreme", "label"],
                      ([iso[i], em.smoothed[i, 1], labels[i]] for i in range(len(series))))
            write_csv(sdir / "histogram.csv", *_plot_rows_histogram(sample, fitted))
            write_csv(sdir / "qq_normal.csv", *_plot_rows_qq(residuals))
            write_csv(sdir / "densities.csv", *_plot_rows_densities(sample, fitted))
            files = ["residuals.csv", "regimes.csv", "histogram.csv", "qq_normal.csv", "densities.csv"]
            if sim is not None:
                write_csv(sdir / "paths.csv", ["path_id", "day", "regime", "t_tilde", "temperature"], sim.rows())
                files.append("paths.csv")
            return {f: f"{name}/{f}" for f in files}

        artifacts = st.run("write", write, "check that the output directory is writable")
    section["artifacts"] = artifacts
    return section


def _file_sha256(path: Path) -> str:
    try:
        return hashlib.sha256(path.read_bytes()).hexdigest()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc


def provenance(config: PipelineConfig) -> dict:
    return {
        "package": "tmlregime", "version": __version__,
        "numpy": np.__version__, "scipy": scipy.__version__,
        "python": ".".join(platform.python_version_tuple()[:2]),
        "seed": config.seed, "config_hash": config.config_hash(), "config": config.snapshot(),
        "inputs": [{"station": s.name, "file": Path(s.path).name, "sha256": _file_sha256(config.resolve(s))}
                   for s in config.inputs],
    }


def run_pipeline(config: PipelineConfig, output_dir=None) -> dict:
    """Run every station and write ``report.json`` plus per-station CSV artifacts.

    ``output_dir`` overrides ``config.output_dir``; with neither set nothing
    is written. Input files are checked before any computation. When a
    stage fails, the completed sections are written to
    ``report.incomplete.json`` and the stage-tagged error is re-raised.
    """
    config.validate_files()
    out = output_dir if output_dir is not None else config.output_dir
    out_dir = Path(out) if out is not None else None
    report = {"schema_version": SCHEMA_VERSION, "provenance": provenance(config), "stations": {}}

    def job(i):
        return run_station(config, i, out_dir)

    indices = range(len(config.inputs))
    results: dict = {}
    error = None
    if config.workers == 1 or len(config.inputs) == 1:
        for i in indices:
            try:
                results[i] = job(i)
            except StageError as exc:
                error = exc
                break
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {i: pool.submit(job, i) for i in indices}
            for i in indices:
                try:
                    results[i] = futures[i].result()
                except StageError as exc:
                    error = error or exc
    for i in sorted(results):
        report["stations"][config.inputs[i].name] = results[i]
    if error is not None:
        report["status"] = "incomplete"
        report["error"] = {"station": error.station, "stage": error.stage, "message": str(error)}
        if out_dir is not None:
            write_json(out_dir / "report.incomplete.json", report)
        raise error
    report["status"] = "complete"
    if out_dir is not None:
        write_json(out_dir / "report.json", report)
    return to_jsonable(report)


def report_text(report: dict) -> str:
    """Canonical serialized form of a report (what ``report.json`` contains)."""
    return dumps_json(report)


__all__ = [
    "EMSettings", "FitSettings", "OUTPUT_ENV", "PipelineConfig", "SimulationSettings", "StationInput",
    "TestSettings", "provenance", "report_text", "run_pipeline", "run_station", "station_seed",
]
