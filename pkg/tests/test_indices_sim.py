import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tmlregime.errors import ValidationError
from tmlregime.ghdist import GHParams, moments
from tmlregime.indices import IndexSpec, cat_index, compute_index, gdd_index, index_distribution
from tmlregime.ingest import TemperatureSeries
from tmlregime.regime import RegimeModel, TransitionMatrix
from tmlregime.seasonal import SeasonalParams, seasonal_value
from tmlregime.simulate import SimulationSpec, simulate_paths

temps = st.lists(st.floats(-30, 50, allow_nan=False), min_size=1, max_size=120)


class TestCat:
    def test_constant(self):
        assert cat_index(np.ones(10), 1, 10) == 10.0

    def test_single_day(self):
        x = np.array([3.0, 4.5, 6.0])
        assert cat_index(x, 2, 2) == 4.5

    def test_random_30_days_exact(self):
        x = np.random.default_rng(0).normal(25, 5, 30)
        assert cat_index(x, 1, 30) == oracles.brute_cat(x.tolist(), 1, 30)

    @given(temps, st.data())
    def test_additive_on_dyadic_values(self, values, data):
        x = np.round(np.asarray(values) * 16) / 16
        n = x.size
        if n < 2:
            return
        t1 = data.draw(st.integers(1, n - 1))
        t3 = data.draw(st.integers(t1 + 1, n))
        t2 = data.draw(st.integers(t1, t3 - 1))
        assert cat_index(x, t1, t3) == cat_index(x, t1, t2) + cat_index(x, t2 + 1, t3)

    def test_calendar_dates(self):
        s = TemperatureSeries(dt.date(2020, 1, 1), np.arange(1.0, 11.0))
        assert cat_index(s, dt.date(2020, 1, 2), dt.date(2020, 1, 4)) == 2 + 3 + 4

    @pytest.mark.parametrize("tau1, tau2", [(0, 3), (2, 11), (5, 4)])
    def test_out_of_range(self, tau1, tau2):
        with pytest.raises(ValidationError):
            cat_index(np.ones(10), tau1, tau2)

    def test_missing_day_in_window(self):
        x = np.ones(10)
        x[4] = np.nan
        with pytest.raises(ValidationError, match="missing"):
            cat_index(x, 1, 10)

    def test_paths_one_value_per_row(self):
        paths = np.arange(20.0).reshape(4, 5)
        np.testing.assert_array_equal(cat_index(paths, 2, 4), paths[:, 1:4].sum(axis=1))


class TestGdd:
    def test_all_below_threshold(self):
        assert gdd_index(np.full(20, 10.0), 1, 20, 27.0) == 0.0

    def test_very_low_threshold_is_shifted_cat(self):
        x = np.random.default_rng(1).normal(25, 5, 40)
        t = -1e3
        assert gdd_index(x, 3, 30, t) == pytest.approx(cat_index(x, 3, 30) - 28 * t, rel=1e-15)

    @given(temps, st.floats(-40, 60), st.data())
    def test_matches_brute_force(self, values, t_opt, data):
        x = np.asarray(values)
        t1 = data.draw(st.integers(1, x.size))
        t2 = data.draw(st.integers(t1, x.size))
        assert gdd_index(x, t1, t2, t_opt) == oracles.brute_gdd(values, t1, t2, t_opt)

    @given(temps, st.floats(-40, 60), st.floats(0, 30))
    def test_monotone_and_nonnegative(self, values, t_opt, step):
        x = np.asarray(values)
        lo = gdd_index(x, 1, x.size, t_opt)
        hi = gdd_index(x, 1, x.size, t_opt + step)
        assert lo >= hi >= 0.0

    def test_spec_requires_threshold(self):
        with pytest.raises(ValidationError):
            IndexSpec("GDD", 1, 10)
        with pytest.raises(ValidationError):
            IndexSpec("CAT", 1, 10, 27.0)

    def test_non_finite_threshold(self):
        with pytest.raises(ValidationError):
            gdd_index(np.ones(5), 1, 5, math.inf)


class TestIndexDistribution:
    def test_identical_paths(self):
        paths = np.tile(np.arange(1.0, 11.0), (5, 1))
        summary = index_distribution(paths, IndexSpec("CAT", 1, 10))
        assert summary.std == 0.0 and set(summary.quantiles.values()) == {55.0}

    def test_linearity_of_cat(self):
        paths = np.random.default_rng(2).normal(25, 4, (200, 90))
        summary = index_distribution(paths, IndexSpec("CAT", 10, 80))
        assert summary.mean == pytest.approx(cat_index(paths.mean(axis=0), 10, 80), abs=1e-9)

    def test_gdd_mean_recomputed(self):
        paths = np.random.default_rng(3).normal(25, 4, (50, 60))
        spec = IndexSpec("GDD", 1, 60, 27.0)
        summary = index_distribution(paths, spec)
        per_path = [oracles.brute_gdd(row.tolist(), 1, 60, 27.0) for row in paths]
        np.testing.assert_array_equal(summary.values, per_path)
        assert summary.mean == float(np.mean(per_path))

    def test_type7_quantiles(self):
        paths = np.arange(1.0, 5.0)[:, None] * np.ones((4, 1))
        summary = index_distribution(paths, IndexSpec("CAT", 1, 1), probs=(0.5, 0.1))
        assert summary.quantiles == {"0.5": 2.5, "0.1": 1.3}
        assert compute_index(paths, IndexSpec("CAT", 1, 1)).tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_empty(self):
        with pytest.raises(ValidationError):
            index_distribution(np.empty((0, 5)), IndexSpec("CAT", 1, 1))


MODEL = RegimeModel(-0.2, 0.05, 0.5, 1.4, TransitionMatrix.from_stay(0.99, 0.95))


class TestSimulation:
    def test_degenerate_constant(self):
        m = RegimeModel(0.0, 1e-300, 0.0, 1e-300, TransitionMatrix.from_stay(0.5, 0.5))
        # kappa = 0 sits on the stability boundary, so it needs the explicit override
        sim = simulate_paths(SimulationSpec(m, 50, 3, seed=1, initial_value=12.5, allow_unstable=True))
        np.testing.assert_allclose(sim.t_tilde, 12.5, rtol=0, atol=1e-250)

    def test_geometric_recursion(self):
        m = RegimeModel(-0.3, 1e-300, 9.0, 1.0, TransitionMatrix.from_stay(1.0, 0.5))
        sim = simulate_paths(SimulationSpec(m, 40, 2, seed=2, initial_value=5.0, initial_regime=1))
        want = 5.0 * 0.7 ** np.arange(1, 41)
        np.testing.assert_allclose(sim.t_tilde, np.tile(want, (2, 1)), rtol=1e-12)
        assert np.all(sim.regimes == 1)

    def test_regime_occupancy(self):
        tm = TransitionMatrix.from_stay(0.9, 0.7)
        sim = simulate_paths(SimulationSpec(RegimeModel(-0.2, 0.05, 0.0, 1.0, tm), 100_000, 1, seed=3,
                                            initial_value=1.0))
        share = float(np.mean(sim.regimes == 1))
        pi1 = tm.p21 / (tm.p12 + tm.p21)
        # standard error of a two-state Markov chain mean: inflate iid SE by (1 + l) / (1 - l)
        lam = tm.p11 + tm.p22 - 1.0
        se = math.sqrt(pi1 * (1 - pi1) / 1e5 * (1 + lam) / (1 - lam))
        assert abs(share - pi1) < 3 * se

    def test_reproducible_and_prefix_stable(self):
        a = simulate_paths(SimulationSpec(MODEL, 30, 5, seed=4, initial_value=1.0))
        b = simulate_paths(SimulationSpec(MODEL, 30, 5, seed=4, initial_value=1.0))
        c = simulate_paths(SimulationSpec(MODEL, 30, 3, seed=4, initial_value=1.0))
        np.testing.assert_array_equal(a.t_tilde, b.t_tilde)
        np.testing.assert_array_equal(a.t_tilde[:3], c.t_tilde)
        np.testing.assert_array_equal(a.regimes[:3], c.regimes)

    def test_unstable_refused(self):
        m = RegimeModel(-2.5, 0.05, 0.5, 1.4, MODEL.trans)
        with pytest.raises(ValidationError, match="explosive"):
            simulate_paths(SimulationSpec(m, 10))
        assert simulate_paths(SimulationSpec(m, 10, allow_unstable=True, initial_value=1.0)).t_tilde.shape == (1, 10)

    def test_recomposition(self):
        seasonal = SeasonalParams(26.0, 1e-4, 2.0, 100.0)
        sim = simulate_paths(SimulationSpec(MODEL, 20, 2, seed=5, initial_value=1.0, seasonal=seasonal,
                                            start_day=366))
        np.testing.assert_allclose(sim.temperature - sim.t_tilde,
                                   np.tile(seasonal_value(seasonal, np.arange(366, 386)), (2, 1)))

    def test_hyperbolic_shocks_standardized(self):
        shock = GHParams.hyp(1.7178, -0.3921, 0.6179, 1.6783)
        m = RegimeModel(-0.2, 0.05, 0.3, 1.5, TransitionMatrix.from_stay(0.0, 1.0))
        sim = simulate_paths(SimulationSpec(m, 50_000, 1, seed=6, initial_regime=2, innovation=shock))
        inc = np.diff(sim.t_tilde[0])
        assert inc.mean() == pytest.approx(0.3, abs=0.03)
        assert inc.std() == pytest.approx(1.5, rel=0.03)

    def test_raw_hyperbolic_shocks(self):
        shock = GHParams.hyp(1.7178, -0.3921, 0.6179, 1.6783)
        m = RegimeModel(-0.2, 0.05, 0.0, 1.0, TransitionMatrix.from_stay(0.0, 1.0))
        sim = simulate_paths(SimulationSpec(m, 50_000, 1, seed=7, initial_regime=2, innovation=shock,
                                            standardize_innovation=False))
        mean, var = moments(shock)
        inc = np.diff(sim.t_tilde[0])
        assert inc.mean() == pytest.approx(mean, abs=0.05) and inc.var() == pytest.approx(var, rel=0.05)

    def test_csv_rows(self):
        sim = simulate_paths(SimulationSpec(MODEL, 3, 2, seed=8, initial_value=1.0, start_day=10))
        rows = list(sim.rows())
        assert len(rows) == 6 and rows[0][:2] == (0, 10) and rows[-1][:2] == (1, 12)

    @pytest.mark.parametrize("kw", [dict(n_days=0), dict(n_paths=0), dict(initial_regime=3)])
    def test_invalid_spec(self, kw):
        base = dict(model=MODEL, n_days=5)
        base.update(kw)
        with pytest.raises(ValidationError):
            SimulationSpec(**base)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_simulation_seed_determinism(seed):
    spec = SimulationSpec(MODEL, 15, 2, seed=seed, initial_value=1.0)
    np.testing.assert_array_equal(simulate_paths(spec).t_tilde, simulate_paths(spec).t_tilde)
