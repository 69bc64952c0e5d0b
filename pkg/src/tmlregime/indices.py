"""Temperature indices over a measurement period: CAT and GDD."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

KINDS = ("CAT", "GDD")


@dataclass(frozen=True)
class IndexSpec:
    """Measurement period ``[tau1, tau2]`` as 1-based day indices, both ends inclusive."""

    kind: str
    tau1: int
    tau2: int
    t_optimal: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown index kind {self.kind!r}; expected one of {KINDS}")
        if self.tau1 > self.tau2:
            raise ValidationError(f"measurement period is empty: tau1={self.tau1} > tau2={self.tau2}")
        if (self.kind == "GDD") != (self.t_optimal is not None):
            raise ValidationError("t_optimal is required for GDD and not accepted for CAT")

    @property
    def label(self) -> str:
        suffix = f"_T{self.t_optimal:g}" if self.kind == "GDD" else ""
        return f"{self.kind}_{self.tau1}_{self.tau2}{suffix}"

    def as_dict(self) -> dict:
        return {"kind": self.kind, "tau1": self.tau1, "tau2": self.tau2, "t_optimal": self.t_optimal}


def _day(tau, start: dt.date | None) -> int:
    if isinstance(tau, dt.date):
        if start is None:
            raise ValidationError("a calendar date needs a series with a start date")
        return (tau - start).days + 1
    return int(tau)


def _window(series, tau1, tau2) -> np.ndarray:
    start = getattr(series, "start_date", None)
    values = np.asarray(getattr(series, "values", series), dtype=float)
    lo, hi = _day(tau1, start), _day(tau2, start)
    n = values.shape[-1]
    if lo > hi:
        raise ValidationError(f"measurement period is empty: {tau1} > {tau2}")
    if lo < 1 or hi > n:
        raise ValidationError(f"measurement period [{lo}, {hi}] lies outside the series days [1, {n}]")
    window = values[..., lo - 1:hi]
    if np.any(np.isnan(window)):
        raise ValidationError("measurement period contains missing days")
    return window


def _sum(window: np.ndarray):
    """Correctly rounded sum along the last axis, so results do not depend on summation order."""
    if window.ndim == 1:
        return math.fsum(window.tolist())
    return np.array([math.fsum(row) for row in window.reshape(-1, window.shape[-1]).tolist()]).reshape(
        window.shape[:-1])


def cat_index(series, tau1, tau2):
    """Sum of daily average temperature over ``[tau1, tau2]``.

    ``series`` may be a 2-D array of paths, in which case one value per row
    is returned.
    """
    return _sum(_window(series, tau1, tau2))


def gdd_index(series, tau1, tau2, t_optimal: float):
    """Sum of ``max(T(t) - t_optimal, 0)`` over ``[tau1, tau2]``."""
    if not math.isfinite(t_optimal):
        raise ValidationError("t_optimal must be finite")
    return _sum(np.maximum(_window(series, tau1, tau2) - t_optimal, 0.0))


def compute_index(series, spec: IndexSpec):
    if spec.kind == "CAT":
        return cat_index(series, spec.tau1, spec.tau2)
    return gdd_index(series, spec.tau1, spec.tau2, spec.t_optimal)


@dataclass(frozen=True)
class IndexSummary:
    spec: IndexSpec
    values: np.ndarray
    mean: float
    std: float
    quantiles: dict
    histogram_counts: list
    histogram_edges: list

    def as_dict(self) -> dict:
        return {"spec": self.spec.as_dict(), "n_paths": int(self.values.size), "mean": self.mean,
                "std": self.std, "quantiles": self.quantiles,
                "histogram": {"counts": self.histogram_counts, "edges": self.histogram_edges}}


def index_distribution(paths, spec: IndexSpec, probs=(0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99),
                       bins: int = 20) -> IndexSummary:
    """Per-path index values reduced to mean, std, linear-interpolation quantiles and a histogram."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    if paths.size == 0:
        raise ValidationError("no paths to summarize")
    values = np.atleast_1d(compute_index(paths, spec))
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    q = np.quantile(values, probs)
    counts, edges = np.histogram(values, bins=bins)
    return IndexSummary(spec, values, float(values.mean()), std,
                        {f"{p:g}": float(v) for p, v in zip(probs, q)}, counts.tolist(), edges.tolist())
