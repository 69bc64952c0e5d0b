import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmlregime.errors import DataIOError, ValidationError
from tmlregime.ingest import (TemperatureSeries, daily_average, descriptive_stats, fill_missing,
                              format_station_csv, load_station_csv, parse_station_csv)


def _csv(rows, header="date,tmax,tmin"):
    return header + "\n" + "\n".join(rows) + "\n"


class TestDailyAverage:
    def test_midpoint(self):
        assert daily_average(30.0, 20.0) == 25.0

    def test_elementwise(self):
        np.testing.assert_array_equal(daily_average([30.0, 10.0], [20.0, 10.0]), [25.0, 10.0])

    def test_nan_propagates(self):
        assert math.isnan(daily_average(math.nan, 20.0))

    def test_max_below_min_rejected(self):
        with pytest.raises(ValidationError):
            daily_average(10.0, 20.0)

    @given(st.floats(-60, 60), st.floats(0, 40))
    def test_between_extremes(self, tmin, spread):
        avg = daily_average(tmin + spread, tmin)
        assert tmin <= avg <= tmin + spread


class TestParse:
    def test_basic(self):
        s = parse_station_csv(_csv(["2020-01-01,30,20", "2020-01-02,31,21"]), "bole")
        assert s.start_date == dt.date(2020, 1, 1)
        np.testing.assert_array_equal(s.values, [25.0, 26.0])
        assert s.station_id == "bole"

    def test_absent_day_becomes_missing(self):
        s = parse_station_csv(_csv(["2020-01-01,30,20", "2020-01-03,31,21"]))
        assert len(s) == 3 and s.n_missing == 1 and np.isnan(s.values[1])

    def test_empty_cells_are_missing(self):
        s = parse_station_csv(_csv(["2020-01-01,30,20", "2020-01-02,,"]))
        assert s.n_missing == 1

    def test_leap_day_is_kept(self):
        s = parse_station_csv(_csv(["2020-02-28,30,20", "2020-02-29,30,22", "2020-03-01,30,24"]))
        assert len(s) == 3 and s.values[1] == 26.0

    @pytest.mark.parametrize("rows, message", [
        (["2020-01-02,30,20", "2020-01-01,30,20"], "line 3"),
        (["2020-01-01,30,20", "2020-01-01,30,20"], "duplicate"),
        (["2020-01-01,20,30"], "tmax < tmin"),
        (["2020-13-01,30,20"], "bad ISO date"),
        (["2020-01-01,warm,20"], "not a number"),
        (["2020-01-01,30"], "expected 3 fields"),
    ])
    def test_malformed_rows(self, rows, message):
        with pytest.raises(ValidationError, match=message):
            parse_station_csv(_csv(rows))

    def test_missing_column(self):
        with pytest.raises(ValidationError, match="tmin"):
            parse_station_csv(_csv(["2020-01-01,30"], header="date,tmax"))

    def test_tavg_must_agree(self):
        with pytest.raises(ValidationError, match="tavg"):
            parse_station_csv(_csv(["2020-01-01,30,20,24"], header="date,tmax,tmin,tavg"))

    def test_header_only(self):
        with pytest.raises(ValidationError):
            parse_station_csv("date,tmax,tmin\n")

    def test_round_trip(self):
        s = parse_station_csv(_csv(["2020-01-01,30.1,20.3", "2020-01-03,31.7,21.2"]))
        back = parse_station_csv(format_station_csv(s))
        np.testing.assert_array_equal(back.values, s.values)
        assert back.start_date == s.start_date

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(DataIOError):
            load_station_csv(tmp_path / "absent.csv")


def _series(n=800, start=dt.date(2001, 1, 1), seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    values = 20 + 5 * np.sin(2 * np.pi * t / 365) + rng.normal(0, 1, n)
    return TemperatureSeries(start, values, "s")


class TestFillMissing:
    def test_complete_series_unchanged(self):
        s = _series()
        assert fill_missing(s) is s

    def test_filled_value_is_combined_average(self):
        s = _series()
        values = s.values.copy()
        i = 400  # 2002-02-05; the same day in 2001 is index 35
        values[i] = np.nan
        filled = fill_missing(TemperatureSeries(s.start_date, values, "s"))
        neighbours = np.concatenate([values[i - 7:i], values[i + 1:i + 8]]).mean()
        assert filled.values[i] == pytest.approx(0.5 * (neighbours + values[35]), rel=1e-15)
        assert filled.filled[i] and filled.filled.sum() == 1

    def test_consecutive_gap_uses_earlier_fill(self):
        s = _series()
        values = s.values.copy()
        values[500:502] = np.nan
        filled = fill_missing(TemperatureSeries(s.start_date, values, "s")).values
        neighbours = np.concatenate([values[494:500], [filled[500]], values[502:509]]).mean()
        assert filled[501] == pytest.approx(0.5 * (neighbours + values[501 - 365]), rel=1e-15)

    def test_gap_in_first_year_has_no_history(self):
        values = _series().values.copy()
        values[100] = np.nan
        with pytest.raises(ValidationError, match="earlier year"):
            fill_missing(TemperatureSeries(dt.date(2001, 1, 1), values, "s"))

    def test_boundary_gap_refused(self):
        values = _series().values.copy()
        values[-2] = np.nan
        with pytest.raises(ValidationError, match="boundary"):
            fill_missing(TemperatureSeries(dt.date(2001, 1, 1), values, "s"))

    def test_too_many_missing(self):
        values = _series().values.copy()
        values[400:500] = np.nan
        with pytest.raises(ValidationError, match="refused"):
            fill_missing(TemperatureSeries(dt.date(2001, 1, 1), values, "s"))


class TestDescriptiveStats:
    def test_known_sample(self):
        d = descriptive_stats([1.0, 2.0, 2.0, 3.0, 7.0])
        assert d.n == 5 and d.mean == 3.0 and d.median == 2.0 and d.mode == 2.0
        assert d.std == pytest.approx(np.std([1, 2, 2, 3, 7], ddof=1))
        assert d.min == 1.0 and d.max == 7.0

    def test_normal_kurtosis_near_three(self):
        d = descriptive_stats(np.random.default_rng(3).standard_normal(200_000))
        assert d.kurtosis == pytest.approx(3.0, abs=0.05)
        assert d.skewness == pytest.approx(0.0, abs=0.02)

    def test_rejects_gaps(self):
        with pytest.raises(ValidationError):
            descriptive_stats([1.0, np.nan])

    @settings(max_examples=50)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=50))
    def test_order_statistics_bracket_mean(self, xs):
        d = descriptive_stats(xs)
        assert d.min <= d.median <= d.max
        assert d.min - 1e-9 <= d.mean <= d.max + 1e-9
