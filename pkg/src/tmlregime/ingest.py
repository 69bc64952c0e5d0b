"""Station record loading, daily averages and gap filling."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataIOError, ValidationError

MAX_MISSING_FRACTION = 0.10
CSV_FIELDS = ("date", "tmax", "tmin", "tavg")


@dataclass(frozen=True)
class TemperatureSeries:
    """Daily average temperatures at unit spacing starting at ``start_date``.

    Missing days are NaN. ``tmax``/``tmin`` are carried along when known so
    that a series can be written back in the station schema.
    """

    start_date: dt.date
    values: np.ndarray
    station_id: str = "station"
    tmax: np.ndarray | None = None
    tmin: np.ndarray | None = None
    filled: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValidationError("a temperature series needs at least one value")
        object.__setattr__(self, "values", values)
        for name in ("tmax", "tmin"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != values.shape:
                    raise ValidationError(f"{name} length does not match values")
                object.__setattr__(self, name, arr)

    def __len__(self):
        return self.values.size

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    @property
    def missing_fraction(self) -> float:
        return self.n_missing / len(self)

    @property
    def is_complete(self) -> bool:
        return self.n_missing == 0

    def index_of(self, day: dt.date) -> int:
        return (day - self.start_date).days


def daily_average(tmax, tmin):
    """Mean of the daily maximum and minimum temperature.

    Works elementwise on arrays. A NaN in either input gives NaN; a maximum
    below the minimum raises :class:`ValidationError`.
    """
    tmax = np.asarray(tmax, dtype=float)
    tmin = np.asarray(tmin, dtype=float)
    with np.errstate(invalid="ignore"):
        bad = tmax < tmin
    if np.any(bad):
        raise ValidationError(f"tmax < tmin in {int(np.sum(bad))} record(s)")
    out = (tmax + tmin) / 2.0
    return float(out) if out.ndim == 0 else out


def _parse_float(text: str, lineno: int, column: str) -> float:
    text = text.strip()
    if text == "" or text.lower() in ("nan", "na"):
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"line {lineno}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"line {lineno}: column {column!r} is not finite")
    return value


def parse_station_csv(text: str, station_id: str = "station", delimiter: str = ",") -> TemperatureSeries:
    """Parse station CSV text (``date,tmax,tmin[,tavg]``) into a daily series.

    Absent calendar days become missing entries. Duplicate or decreasing
    dates and malformed rows raise :class:`ValidationError` with the line
    number.
    """
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise ValidationError("empty CSV input") from None
    for required in ("date", "tmax", "tmin"):
        if required not in header:
            raise ValidationError(f"line 1: header lacks required column {required!r}")
    col = {name: header.index(name) for name in header}
    has_tavg = "tavg" in col

    rows: list[tuple[dt.date, float, float, float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValidationError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[col["date"]].strip())
        except ValueError:
            raise ValidationError(f"line {lineno}: bad ISO date {row[col['date']]!r}") from None
        tmax = _parse_float(row[col["tmax"]], lineno, "tmax")
        tmin = _parse_float(row[col["tmin"]], lineno, "tmin")
        if tmax < tmin:
            raise ValidationError(f"line {lineno}: tmax < tmin on {day.isoformat()}")
        tavg = (tmax + tmin) / 2.0
        if has_tavg:
            given = _parse_float(row[col["tavg"]], lineno, "tavg")
            if not math.isnan(given):
                if not math.isnan(tavg) and abs(given - tavg) > 1e-9 * max(1.0, abs(tavg)):
                    raise ValidationError(f"line {lineno}: tavg disagrees with (tmax + tmin) / 2")
                tavg = given
        if rows:
            prev = rows[-1][0]
            if day == prev:
                raise ValidationError(f"line {lineno}: duplicate date {day.isoformat()}")
            if day < prev:
                raise ValidationError(f"line {lineno}: date {day.isoformat()} is before {prev.isoformat()}")
        rows.append((day, tmax, tmin, tavg))

    if not rows:
        raise ValidationError("CSV contains a header but no records")
    start = rows[0][0]
    n = (rows[-1][0] - start).days + 1
    tmax_arr = np.full(n, np.nan)
    tmin_arr = np.full(n, np.nan)
    values = np.full(n, np.nan)
    for day, tmax, tmin, tavg in rows:
        i = (day - start).days
        tmax_arr[i], tmin_arr[i], values[i] = tmax, tmin, tavg
    return TemperatureSeries(start, values, station_id, tmax_arr, tmin_arr)


def load_station_csv(path, station_id: str | None = None, delimiter: str = ",") -> TemperatureSeries:
    """Load a station CSV file; ``station_id`` defaults to the file stem."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    return parse_station_csv(text, station_id or path.stem, delimiter)


def _fmt(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def format_station_csv(series: TemperatureSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    n = len(series)
    tmax = series.tmax if series.tmax is not None else np.full(n, np.nan)
    tmin = series.tmin if series.tmin is not None else np.full(n, np.nan)
    for i, day in enumerate(series.dates):
        writer.writerow((day.isoformat(), _fmt(tmax[i]), _fmt(tmin[i]), _fmt(series.values[i])))
    return buf.getvalue()


def write_station_csv(series: TemperatureSeries, path) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, format_station_csv(series))


def _prior_year_values(series: TemperatureSeries, index: int, original: np.ndarray) -> list[float]:
    day = series.start_date + dt.timedelta(days=index)
    month, dom = day.month, day.day
    if (month, dom) == (2, 29):
        dom = 28
    out = []
    for year in range(series.start_date.year, day.year):
        try:
            prior = dt.date(year, month, dom)
        except ValueError:
            continue
        j = series.index_of(prior)
        if 0 <= j < len(series) and not np.isnan(original[j]):
            out.append(float(original[j]))
    return out


def fill_missing(series: TemperatureSeries, window_days: int = 7) -> TemperatureSeries:
    """Fill gaps with the combined average of neighbouring days and prior years.

    Each missing day becomes the mean of (a) the average over ``window_days``
    days either side and (b) the same calendar day averaged over all earlier
    years where it was observed. Gaps are processed chronologically, so an
    earlier filled day counts as a neighbour of a later one; neighbours that
    are still missing are skipped, but each side must keep at least one
    usable day.

    Raises
    ------
    ValidationError
        If more than 10% of the series is missing, or a gap sits within
        ``window_days`` of either end of the series, lacks usable neighbours,
        or has no observation of its calendar day in an earlier year.
    """
    if series.is_complete:
        return series
    if series.missing_fraction > MAX_MISSING_FRACTION:
        raise ValidationError(
            f"{series.missing_fraction:.1%} of {series.station_id} is missing; "
            f"gap filling is refused above {MAX_MISSING_FRACTION:.0%}"
        )
    original = series.values
    values = original.copy()
    n = len(values)
    for i in np.flatnonzero(np.isnan(original)):
        day = (series.start_date + dt.timedelta(days=int(i))).isoformat()
        if i < window_days or i + window_days >= n:
            raise ValidationError(f"missing day {day} lies within {window_days} days of the series boundary")
        before = values[i - window_days:i]
        after = values[i + 1:i + 1 + window_days]
        before, after = before[~np.isnan(before)], after[~np.isnan(after)]
        if before.size == 0 or after.size == 0:
            raise ValidationError(f"missing day {day} has no usable neighbours on one side")
        neighbour_avg = np.concatenate([before, after]).mean()
        prior = _prior_year_values(series, int(i), original)
        if not prior:
            raise ValidationError(f"missing day {day} has no observation in any earlier year")
        values[i] = 0.5 * (neighbour_avg + float(np.mean(prior)))
    return replace(series, values=values, filled=np.isnan(original))


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    mean: float
    median: float
    mode: float
    std: float
    min: float
    max: float
    skewness: float
    kurtosis: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def descriptive_stats(values) -> DescriptiveStats:
    """Summary statistics of a complete sample.

    ``std`` uses ``ddof=1``; skewness and kurtosis are the standardized
    third and fourth central moments (kurtosis of a normal is 3). The mode is
    taken over values rounded to 0.1, ties going to the smallest value.
    """
    if isinstance(values, TemperatureSeries):
        values = values.values
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValidationError("descriptive statistics of an empty sample")
    if np.any(np.isnan(x)):
        raise ValidationError("descriptive statistics need a complete series; fill gaps first")
    mean = float(x.mean())
    dev = x - mean
    m2 = float(np.mean(dev**2))
    if m2 > 0:
        skew = float(np.mean(dev**3)) / m2**1.5
        kurt = float(np.mean(dev**4)) / m2**2
    else:
        skew, kurt = 0.0, math.nan
    rounded = np.round(x, 1)
    uniq, counts = np.unique(rounded, return_counts=True)
    mode = float(uniq[np.argmax(counts)])
    std = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return DescriptiveStats(
        n=int(x.size), mean=mean, median=float(np.median(x)), mode=mode, std=std,
        min=float(x.min()), max=float(x.max()), skewness=skew, kurtosis=kurt,
    )
