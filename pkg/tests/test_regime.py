import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tmlregime.errors import NumericalError, RegimeCollapseError, ValidationError
from tmlregime.ghdist import GHParams
from tmlregime.regime import (EMConfig, RegimeModel, TransitionMatrix, base_density, classify_regimes, e_step,
                              em_calibrate, expected_transition_counts, extract_regime_residuals, forward,
                              hamilton_filter, initial_model, joint_smoothed, kim_smooth, m_step_base,
                              m_step_shifted, shifted_density, update_transitions)
from tmlregime.simulate import SimulationSpec, simulate_paths

TINY = 1e-300
MODEL = RegimeModel(-0.2, 0.05, 0.5, 1.4, TransitionMatrix.from_stay(0.99, 0.95))


def _sim(n=1500, seed=0, model=MODEL):
    sim = simulate_paths(SimulationSpec(model, n, 1, seed=seed, initial_value=1.0))
    return sim.t_tilde[0], sim.regimes[0].astype(int)


class TestTransitionMatrix:
    def test_rows_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            TransitionMatrix(0.9, 0.2, 0.1, 0.9)

    def test_stationary(self):
        tm = TransitionMatrix.from_stay(0.9, 0.6)
        pi = tm.stationary()
        np.testing.assert_allclose(pi @ tm.as_array(), pi, atol=1e-15)
        assert pi.sum() == pytest.approx(1.0)

    def test_absorbing_chain_stationary_is_uniform(self):
        np.testing.assert_array_equal(TransitionMatrix.from_stay(1.0, 1.0).stationary(), [0.5, 0.5])

    def test_model_dict_round_trip(self):
        assert RegimeModel.from_dict(MODEL.as_dict()) == MODEL


class TestDensities:
    def test_base_density_is_heteroskedastic_gaussian(self):
        # mean (1 + kappa) x_prev, std sigma_m |x_prev|
        x_prev, x_now = -2.0, -1.5
        sd = 0.05 * 2.0
        want = math.exp(-0.5 * ((x_now - 0.8 * x_prev) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
        assert float(base_density(-0.2, 0.05, x_prev, x_now)) == pytest.approx(want, rel=1e-14)

    def test_shifted_density(self):
        want = math.exp(-0.5 * (0.3 / 1.4) ** 2) / (1.4 * math.sqrt(2 * math.pi))
        assert float(shifted_density(0.5, 1.4, 1.0, 1.8)) == pytest.approx(want, rel=1e-14)

    def test_level_floor_policy_error(self):
        with pytest.raises(ValidationError, match="degenerate"):
            hamilton_filter([0.0, 1.0, 2.0], MODEL, floor=1e-6, policy="error")


class TestFilterSmoother:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 10_000))
    def test_matches_enumeration(self, n, seed):
        rng = np.random.default_rng(seed)
        kappa, sm, mu, sl = -rng.uniform(0.05, 0.8), rng.uniform(0.05, 0.6), rng.normal(), rng.uniform(0.3, 2)
        p11, p22 = rng.uniform(0.05, 0.95, 2)
        init = rng.dirichlet([1, 1])
        x = rng.normal(0, 2, n)
        fo = e_step(x, RegimeModel(kappa, sm, mu, sl, TransitionMatrix.from_stay(p11, p22)), init, floor=TINY)
        ref = oracles.enumerate_paths(x.tolist(), kappa, sm, mu, sl, [[p11, 1 - p11], [1 - p22, p22]],
                                      init.tolist())
        np.testing.assert_allclose(fo.filtered, ref["filtered"], atol=1e-12)
        np.testing.assert_allclose(fo.smoothed, ref["smoothed"], atol=1e-12)
        np.testing.assert_allclose(expected_transition_counts(fo), ref["counts"], atol=1e-12)
        assert fo.loglik == pytest.approx(ref["loglik"], rel=1e-12, abs=1e-12)

    def test_label_symmetry(self):
        rng = np.random.default_rng(3)
        log_dens = rng.normal(-1, 1, size=(30, 2))
        tm = TransitionMatrix.from_stay(0.8, 0.6)
        a = kim_smooth(forward(log_dens, tm, [0.3, 0.7]))
        b = kim_smooth(forward(log_dens[:, ::-1], tm.swapped(), [0.7, 0.3]))
        np.testing.assert_allclose(a.filtered, b.filtered[:, ::-1], atol=1e-14)
        np.testing.assert_allclose(a.smoothed, b.smoothed[:, ::-1], atol=1e-14)
        assert a.loglik == pytest.approx(b.loglik, rel=1e-14)

    def test_probabilities_sum_to_one(self):
        x, _ = _sim(500)
        fo = e_step(x, MODEL, floor=TINY)
        for arr in (fo.filtered, fo.predicted, fo.smoothed):
            np.testing.assert_allclose(arr.sum(axis=1), 1.0, atol=1e-12)
        joint = joint_smoothed(fo)
        np.testing.assert_allclose(joint.sum(axis=1), fo.smoothed[1:], atol=1e-12)
        np.testing.assert_allclose(joint.sum(axis=2), fo.smoothed[:-1], atol=1e-12)

    def test_last_smoothed_equals_last_filtered(self):
        x, _ = _sim(300)
        fo = e_step(x, MODEL, floor=TINY)
        np.testing.assert_allclose(fo.smoothed[-1], fo.filtered[-1])

    def test_long_series_stays_finite(self):
        x, _ = _sim(10_000, seed=4)
        fo = e_step(x, MODEL, floor=TINY)
        assert np.all(np.isfinite(fo.smoothed)) and math.isfinite(fo.loglik)

    def test_impossible_observation(self):
        log_dens = np.array([[-np.inf, -np.inf]])
        with pytest.raises(NumericalError, match="zero total likelihood"):
            forward(log_dens, TransitionMatrix.from_stay(0.9, 0.9), [0.5, 0.5])

    def test_transition_update_from_counts(self):
        x, _ = _sim(800)
        fo = e_step(x, MODEL, floor=TINY)
        counts = expected_transition_counts(fo)
        tm = update_transitions(fo)
        assert tm.p11 == pytest.approx(counts[0, 0] / counts[0].sum())
        assert tm.p22 == pytest.approx(counts[1, 1] / counts[1].sum())


class TestMStep:
    def test_base_matches_numerical_maximizer(self):
        rng = np.random.default_rng(11)
        x = rng.normal(0, 3, 150)
        w = np.column_stack([rng.uniform(size=150), rng.uniform(size=150)])
        sigma, kappa = m_step_base(x, w, TINY)
        ref = oracles.numerical_argmax(oracles.base_objective, [0.0, -0.5], x, w[1:, 0])
        assert kappa == pytest.approx(ref[1], abs=1e-6) and sigma == pytest.approx(math.exp(ref[0]), abs=1e-6)

    def test_shifted_is_weighted_mean_and_rms(self):
        x = np.array([0.0, 1.0, 3.0, 2.0])
        w = np.array([[0, 0], [0, 1.0], [0, 1.0], [0, 2.0]])
        mu, sigma = m_step_shifted(x, w)
        inc = np.diff(x)
        want_mu = (1 + 2 - 2) / 4
        assert mu == pytest.approx(want_mu)
        assert sigma == pytest.approx(math.sqrt(np.sum([1, 1, 2] * (inc - want_mu) ** 2) / 4))

    def test_tiny_levels_do_not_underflow(self):
        # a long base-regime decay reaches levels near 1e-290, where squares underflow
        e = np.where(np.arange(3000) % 2 == 0, 1.0, -1.0)
        x = np.cumprod(np.concatenate([[1.0], 0.8 + 0.01 * 0.8 * e[1:]]))
        assert x[-1] < 1e-280
        w = np.column_stack([np.ones(x.size), np.zeros(x.size)])
        sigma, kappa = m_step_base(x, w, TINY)
        rel = x[1:] / x[:-1] - 1.0
        assert kappa == pytest.approx(rel.mean(), rel=1e-12)
        assert sigma == pytest.approx(rel.std(), rel=1e-9)

    def test_zero_weight_regime_collapses(self):
        x = np.arange(1.0, 6.0)
        with pytest.raises(RegimeCollapseError):
            m_step_shifted(x, np.column_stack([np.ones(5), np.zeros(5)]))


class TestClassify:
    def test_threshold_is_strict(self):
        labels = classify_regimes(np.array([[0.21, 0.79], [0.2, 0.8], [0.19, 0.81]]), threshold=0.8)
        assert labels.tolist() == ["normal", "normal", "extreme"]

    def test_threshold_range(self):
        with pytest.raises(ValidationError):
            classify_regimes(np.array([[0.5, 0.5]]), threshold=1.0)


class TestEM:
    def test_fixed_point(self):
        x, regimes = oracles.fixed_point_series()
        truth = RegimeModel(-0.2, 1e-3, 5.0, 0.1, TransitionMatrix.from_stay(0.9, 0.8))
        res = em_calibrate(x, truth, EMConfig(level_floor=TINY), init_probs=[1.0, 0.0])
        assert res.converged and res.iterations <= 2
        labels = classify_regimes(res.smoothed)
        np.testing.assert_array_equal(labels == "extreme", regimes == 2)

    def test_recovers_parameters(self):
        x, _ = _sim(5000, seed=21)
        res = em_calibrate(x, config=EMConfig(level_floor=TINY))
        got = res.model.as_dict()
        assert got["kappa"] == pytest.approx(-0.2, rel=0.05) and got["sigma_1"] == pytest.approx(0.05, rel=0.05)
        assert got["sigma_2"] == pytest.approx(1.4, rel=0.1) and got["P11"] == pytest.approx(0.99, abs=0.01)

    @pytest.mark.parametrize("mode", ["estimate", "stationary"])
    def test_initial_probability_modes(self, mode):
        x, _ = _sim(1000, seed=5)
        res = em_calibrate(x, config=EMConfig(level_floor=TINY, initial_probs=mode, monotone_slack=1e-4))
        if mode == "stationary":
            last = RegimeModel.from_dict(res.trace[-1]["params"])
            np.testing.assert_allclose(res.init_probs, last.trans.stationary())
        else:
            # after the first pass the start law is the smoothed first-day posterior
            assert res.init_probs.max() > 0.99
        assert res.init_probs.sum() == pytest.approx(1.0)

    def test_estimate_mode_is_monotone(self):
        x, _ = _sim(1000, seed=6)
        res = em_calibrate(x, config=EMConfig(level_floor=TINY, tol=1e-10))
        ll = np.array([r["loglik"] for r in res.trace])
        assert np.all(np.diff(ll) >= -1e-8)

    def test_multi_start_keeps_best(self):
        x, _ = _sim(1000, seed=7)
        single = em_calibrate(x, config=EMConfig(level_floor=TINY))
        multi = em_calibrate(x, config=EMConfig(level_floor=TINY, n_starts=3, seed=1))
        assert multi.starts_tried == 3 and multi.loglik >= single.loglik - 1e-9

    def test_heavy_tailed_shifted_shock(self):
        x, _ = _sim(1500, seed=8)
        shock = GHParams.hyp(1.7178, -0.3921, 0.6179, 1.6783)
        res = em_calibrate(x, config=EMConfig(level_floor=TINY, shifted_innovation=shock))
        ll = np.array([r["loglik"] for r in res.trace])
        assert np.all(np.diff(ll) >= -1e-8) and res.model.sigma_l > 0

    def test_deterministic(self):
        x, _ = _sim(800, seed=9)
        a = em_calibrate(x, config=EMConfig(n_starts=2))
        b = em_calibrate(x, config=EMConfig(n_starts=2))
        assert a.model == b.model and a.trace == b.trace

    def test_rejects_gaps(self):
        with pytest.raises(ValidationError):
            em_calibrate([1.0, np.nan, 2.0])

    def test_unknown_initial_mode(self):
        with pytest.raises(ValidationError):
            em_calibrate(np.arange(1.0, 50.0), config=EMConfig(initial_probs="uniform"))

    def test_initial_model_is_valid(self):
        x, _ = _sim(400, seed=10)
        m = initial_model(x)
        assert m.sigma_m > 0 and m.sigma_l > 0


class TestResiduals:
    def test_standardized_residuals(self):
        x, regimes = _sim(3000, seed=12)
        fo = e_step(x, MODEL, floor=TINY)
        res = extract_regime_residuals(x, MODEL, fo.smoothed, floor=TINY)
        base = res.classified(1)
        shifted = res.classified(2)
        assert base.std() == pytest.approx(1.0, abs=0.1)
        assert shifted.std() == pytest.approx(1.0, abs=0.15)
        assert res.pooled.size == x.size - 1

    def test_shape_check(self):
        with pytest.raises(ValidationError):
            extract_regime_residuals(np.arange(1.0, 5.0), MODEL, np.ones((3, 2)))
