"""Trend-plus-annual-sinusoid seasonality: least-squares fit and removal."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import TemperatureSeries

PERIOD_DAYS = 365.0
OMEGA = 2.0 * math.pi / PERIOD_DAYS
MODES = ("full", "sinusoid-only")


def _wrap(phi: float) -> float:
    """``phi`` reduced to [0, 365); a tiny negative input would otherwise round up to 365."""
    r = phi % PERIOD_DAYS
    return 0.0 if r >= PERIOD_DAYS else r


@dataclass(frozen=True)
class SeasonalFitRaw:
    """Coefficients of ``a0 + a1 t + a2 sin(wt) + a3 cos(wt)``."""

    a0: float
    a1: float
    a2: float
    a3: float
    residual_sum_squares: float
    n: int = 0


@dataclass(frozen=True)
class SeasonalParams:
    """``A0 + A1 t + A2 sin(2 pi (t - phi) / 365)``, with t = 1 on ``origin``."""

    A0: float
    A1: float
    A2: float
    phi: float
    origin: dt.date | None = None

    def normalized(self) -> "SeasonalParams":
        """Equivalent parameters with ``A2 >= 0`` and ``phi`` in [0, 365)."""
        A2, phi = self.A2, self.phi
        if A2 < 0:
            A2, phi = -A2, phi + PERIOD_DAYS / 2
        return SeasonalParams(self.A0, self.A1, A2, _wrap(phi), self.origin)

    def paper_convention(self) -> "SeasonalParams":
        """Same curve written with a negative amplitude, as in published tables."""
        norm = self.normalized()
        if norm.A2 == 0:
            return norm
        return SeasonalParams(norm.A0, norm.A1, -norm.A2, _wrap(norm.phi + PERIOD_DAYS / 2), norm.origin)

    def as_dict(self) -> dict:
        return {"A0": self.A0, "A1": self.A1, "A2": self.A2, "phi": self.phi}


@dataclass(frozen=True)
class DeseasonalizedSeries:
    start_date: dt.date
    values: np.ndarray
    mode: str = "full"
    params: SeasonalParams | None = None
    station_id: str = "station"

    def __len__(self):
        return len(self.values)


def design_matrix(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.column_stack([np.ones_like(t), t, np.sin(OMEGA * t), np.cos(OMEGA * t)])


def _values(series) -> np.ndarray:
    values = series.values if isinstance(series, TemperatureSeries) else series
    y = np.asarray(values, dtype=float)
    if np.any(np.isnan(y)):
        raise ValidationError("seasonal fitting needs a complete series; fill gaps first")
    return y


def fit_seasonal(series) -> SeasonalFitRaw:
    """Ordinary least squares fit of the linear trend plus annual sinusoid.

    Day index t runs from 1 at the first observation.
    """
    y = _values(series)
    if y.size < 4:
        raise ValidationError(f"seasonal fit needs at least 4 observations, got {y.size}")
    X = design_matrix(np.arange(1, y.size + 1))
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 4:
        raise ValidationError("seasonal design matrix is rank deficient")
    resid = y - X @ coef
    return SeasonalFitRaw(*map(float, coef), residual_sum_squares=float(resid @ resid), n=int(y.size))


def to_amplitude_phase(raw: SeasonalFitRaw, origin: dt.date | None = None) -> SeasonalParams:
    """Rewrite ``a2 sin(wt) + a3 cos(wt)`` as ``A2 sin(w(t - phi))`` with ``A2 >= 0``."""
    amplitude = math.hypot(raw.a2, raw.a3)
    if amplitude == 0.0:
        return SeasonalParams(raw.a0, raw.a1, 0.0, 0.0, origin)
    # a2 = A2 cos(w phi), a3 = -A2 sin(w phi)
    phi = _wrap(math.atan2(-raw.a3, raw.a2) / OMEGA)
    return SeasonalParams(raw.a0, raw.a1, amplitude, phi, origin)


def seasonal_value(params: SeasonalParams, t):
    t = np.asarray(t, dtype=float)
    out = params.A0 + params.A1 * t + params.A2 * np.sin(OMEGA * (t - params.phi))
    return float(out) if out.ndim == 0 else out


def _component(params: SeasonalParams, t, mode: str):
    if mode not in MODES:
        raise ValidationError(f"unknown deseasonalization mode {mode!r}; expected one of {MODES}")
    s = seasonal_value(params, t)
    return s - params.A0 if mode == "sinusoid-only" else s


def deseasonalize(series: TemperatureSeries, params: SeasonalParams, mode: str = "full") -> DeseasonalizedSeries:
    """Subtract the seasonal curve. ``sinusoid-only`` keeps the level ``A0``."""
    y = _values(series)
    t = np.arange(1, y.size + 1)
    return DeseasonalizedSeries(series.start_date, y - _component(params, t, mode), mode, params, series.station_id)


def reseasonalize(values, params: SeasonalParams, mode: str = "full", start_day: int = 1) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    t = np.arange(start_day, start_day + values.shape[-1])
    return values + _component(params, t, mode)


def fit_and_deseasonalize(series: TemperatureSeries, mode: str = "full"):
    raw = fit_seasonal(series)
    params = to_amplitude_phase(raw, series.start_date)
    return raw, params, deseasonalize(series, params, mode)
