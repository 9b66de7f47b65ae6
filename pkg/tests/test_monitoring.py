import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from apcsr._rng import rep_rng
from apcsr.monitoring import (
    MonitorConfig,
    MonitorState,
    calibrate,
    control_limit_analytic,
    control_limit_montecarlo,
    d_statistic,
    ewma_r_block,
    ewma_step,
    ewma_variance,
    in_control_r_path,
    monitor_step,
    nu_from_significance,
    r_statistic,
    run_chart,
    simulate_in_control_arl,
    threshold_moments,
)
from apcsr.pca import from_known
from apcsr.simulation import gen_covariance, ScenarioSpec
from oracles import ewma_loop, thresholded_chi2_moment

# E[(X - nu)_+^k], X ~ chi2(1), from 30-digit quadrature (mpmath), frozen here.
FROZEN_MOMENTS = {
    0.05: (0.955917503547474, 2.9022629628408604),
    0.5: (0.67914135056119913, 2.1773534985899513),
    2.0: (0.25780829037030957, 0.8870051185714501),
}


def cfg(**kw):
    base = dict(gamma=0.4, nu=0.5, alpha=0.005)
    base.update(kw)
    return MonitorConfig(**base)


class TestConfig:
    def test_exactly_one_of_alpha_and_arl(self):
        with pytest.raises(ValueError):
            MonitorConfig(alpha=0.01, target_arl=100)
        with pytest.raises(ValueError):
            MonitorConfig()

    def test_arl_maps_to_alpha(self):
        c = MonitorConfig(target_arl=200)
        assert c.alpha_level == pytest.approx(0.005)

    @pytest.mark.parametrize("kw", [dict(gamma=0.0), dict(gamma=1.5), dict(nu=-1.0), dict(alpha=1.0),
                                    dict(ewma_variance_mode="nope")])
    def test_rejects_bad_parameters(self, kw):
        with pytest.raises(ValueError):
            cfg(**kw)

    def test_auto_calibration_switches_on_dimension(self):
        c = cfg(calibration_mode="auto")
        assert c.resolved_calibration(100) == "monte_carlo"
        assert c.resolved_calibration(5000) == "analytic"

    def test_nu_from_significance(self):
        assert nu_from_significance(0.05) == pytest.approx(3.841458820694124)


class TestEwma:
    def test_gamma_one_copies_input(self):
        state = MonitorState(z=np.array([5.0, -2.0]), r0=1.0)
        y = np.array([0.3, -0.7])
        np.testing.assert_array_equal(ewma_step(state, y, cfg(gamma=1.0)), y)

    def test_first_step(self):
        state = MonitorState.initial(3, 1.0)
        np.testing.assert_allclose(ewma_step(state, np.ones(3), cfg()), 0.4)

    def test_constant_input_converges(self):
        state = MonitorState.initial(2, 1.0)
        c = cfg()
        for _ in range(200):
            state.z = ewma_step(state, np.array([2.0, -1.0]), c)
        np.testing.assert_allclose(state.z, [2.0, -1.0], atol=1e-12)

    def test_non_finite_rejected_and_state_unchanged(self):
        state = MonitorState(z=np.array([1.0, 2.0]), r0=1.0)
        with pytest.raises(ValueError):
            ewma_step(state, np.array([np.nan, 0.0]), cfg())
        np.testing.assert_array_equal(state.z, [1.0, 2.0])

    def test_block_filter_matches_loop(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=(37, 5))
        z0 = rng.normal(size=5)
        c = cfg(ewma_variance_mode="exact_time_varying")
        r, z_last = ewma_r_block(y, c, z0, 4)
        z = ewma_loop(y, 0.4, z0)
        t = np.arange(4, 41)[:, None]
        d = z ** 2 / ewma_variance(0.4, "exact_time_varying", t)
        np.testing.assert_allclose(r, np.maximum(d - 0.5, 0).sum(axis=1), rtol=1e-12)
        np.testing.assert_allclose(z_last, z[-1], rtol=1e-12)


class TestStatistics:
    def test_d_zero(self):
        np.testing.assert_array_equal(d_statistic(np.zeros(3), 1, cfg()), 0.0)

    def test_d_ratio_variance_mode(self):
        d = d_statistic(np.array([math.sqrt(2 / 3)]), 1, cfg(ewma_variance_mode="paper"))
        assert d[0] == pytest.approx(1.0, abs=1e-14)

    def test_variance_modes(self):
        assert ewma_variance(0.4, "paper") == pytest.approx(2 / 3)
        assert ewma_variance(0.4, "asymptotic") == pytest.approx(0.25)
        assert ewma_variance(1.0, "exact_time_varying", 1) == pytest.approx(1.0)

    def test_time_varying_reaches_asymptote(self):
        t = np.arange(200, 1000)
        np.testing.assert_allclose(ewma_variance(0.4, "exact_time_varying", t), 0.25, atol=1e-9)

    def test_time_varying_is_exact_for_zero_start(self):
        # Var(z_t) = gamma^2 * sum_{k<t} (1-gamma)^(2k)
        g = 0.3
        for t in (1, 2, 5, 17):
            direct = g * g * sum((1 - g) ** (2 * k) for k in range(t))
            assert ewma_variance(g, "exact_time_varying", t) == pytest.approx(direct, rel=1e-12)

    def test_d_requires_positive_t(self):
        with pytest.raises(ValueError):
            d_statistic(np.zeros(2), 0, cfg())

    def test_r_examples(self):
        assert r_statistic(np.zeros(4), 0.3) == 0.0
        assert r_statistic([1.5, 0.1], 0.5) == pytest.approx(1.0)
        assert r_statistic([1.5, 0.1], 0.0) == pytest.approx(1.6)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, 8, elements=st.floats(0, 50)), st.floats(0, 5), st.floats(0, 5))
    def test_r_nonnegative_and_nonincreasing_in_nu(self, d, a, b):
        lo, hi = sorted((a, b))
        assert r_statistic(d, hi) >= 0.0
        assert r_statistic(d, lo) >= r_statistic(d, hi)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, 6, elements=st.floats(-20, 20)), arrays(np.bool_, 6))
    def test_d_sign_invariant(self, z, flips):
        signs = np.where(flips, -1.0, 1.0)
        np.testing.assert_array_equal(d_statistic(z, 3, cfg()), d_statistic(z * signs, 3, cfg()))


class TestMoments:
    def test_nu_zero_exact(self):
        m = threshold_moments(0.0)
        assert m.mean == 1.0
        assert m.second_moment == 3.0
        assert m.variance == 2.0

    @pytest.mark.parametrize("nu", sorted(FROZEN_MOMENTS))
    def test_frozen_high_precision_values(self, nu):
        m = threshold_moments(nu)
        assert m.mean == pytest.approx(FROZEN_MOMENTS[nu][0], abs=1e-12)
        assert m.second_moment == pytest.approx(FROZEN_MOMENTS[nu][1], abs=1e-12)

    @pytest.mark.parametrize("nu", [0.0, 0.05, 0.1, 0.2, 0.35, 0.5, 1.0, 2.0, 5.0, 10.0])
    def test_quadrature_oracle(self, nu):
        m = threshold_moments(nu)
        assert m.mean == pytest.approx(thresholded_chi2_moment(nu, 1), abs=1e-8)
        assert m.second_moment == pytest.approx(thresholded_chi2_moment(nu, 2), abs=1e-8)

    def test_variance_nonnegative_and_mean_decreasing(self):
        grid = np.linspace(0, 20, 401)
        ms = [threshold_moments(v) for v in grid]
        assert all(m.variance >= 0 for m in ms)
        assert all(m.variance == pytest.approx(m.second_moment - m.mean ** 2) for m in ms)
        means = np.array([m.mean for m in ms])
        assert np.all(np.diff(means) < 0)

    def test_large_nu_mean_vanishes(self):
        assert threshold_moments(50.0).mean < 1e-10

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            threshold_moments(-0.1)

    def test_monte_carlo_sanity(self):
        x = np.random.default_rng(1).chisquare(1, 2_000_000)
        v = np.maximum(x - 0.35, 0)
        m = threshold_moments(0.35)
        assert v.mean() == pytest.approx(m.mean, rel=5e-3)
        assert v.var() == pytest.approx(m.variance, rel=1e-2)


class TestAnalyticLimit:
    def test_median_limit(self):
        m = threshold_moments(0.2)
        assert control_limit_analytic(300, 0.2, 0.5) == pytest.approx(300 * m.mean, rel=1e-14)

    def test_formula(self):
        m = threshold_moments(0.1)
        expected = 1000 * m.mean + math.sqrt(1000) * math.sqrt(m.variance) * 2.5758293035489
        assert control_limit_analytic(1000, 0.1, 0.005) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
    def test_rejects_alpha(self, alpha):
        with pytest.raises(ValueError):
            control_limit_analytic(10, 0.1, alpha)

    def test_calibrate_dispatches_analytic(self):
        res = calibrate(6000, cfg(nu=0.1, alpha=0.005))
        assert res.method == "analytic"
        assert res.r0 == pytest.approx(control_limit_analytic(6000, 0.1, 0.005))


class TestMonteCarloLimit:
    def test_target_200_holds_on_fresh_seeds(self):
        c = MonitorConfig(gamma=0.4, nu=0.5, target_arl=200)
        res = control_limit_montecarlo(20, c, 200, reps=1000, seed=1)
        assert res.converged
        assert abs(res.empirical_arl - 200) <= 0.05 * 200
        arl, _ = simulate_in_control_arl(20, c, res.r0, reps=2000, seed=99)
        assert 180 <= arl <= 220

    def test_target_1000_within_ten_percent(self):
        c = MonitorConfig(gamma=0.2, nu=1.0, target_arl=1000)
        res = control_limit_montecarlo(11, c, reps=600, seed=2)
        arl, se = simulate_in_control_arl(11, c, res.r0, reps=600, seed=77)
        assert abs(arl - 1000) <= 0.10 * 1000

    def test_deterministic_given_seed(self):
        c = MonitorConfig(target_arl=50)
        a = control_limit_montecarlo(5, c, reps=100, seed=4)
        b = control_limit_montecarlo(5, c, reps=100, seed=4)
        assert a == b

    def test_standard_error_scales_with_reps(self):
        c = MonitorConfig(target_arl=50)
        r0 = control_limit_montecarlo(5, c, reps=200, seed=0).r0
        _, se1 = simulate_in_control_arl(5, c, r0, reps=1000, seed=10)
        _, se2 = simulate_in_control_arl(5, c, r0, reps=2000, seed=11)
        assert se1 / se2 == pytest.approx(math.sqrt(2), rel=0.15)

    def test_rejects_few_reps(self):
        with pytest.raises(ValueError):
            control_limit_montecarlo(5, MonitorConfig(target_arl=50), reps=50)

    def test_paths_independent_of_chunking(self):
        c = MonitorConfig(target_arl=50)
        full = in_control_r_path(3, c, 100, rep_rng(0, 0))
        rng = rep_rng(0, 0)
        y = rng.standard_normal((100, 3))
        r, _ = ewma_r_block(y, c, np.zeros(3), 1)
        np.testing.assert_allclose(full, r)


class TestChart:
    def test_zero_observations_never_alarm(self):
        model = from_known(np.zeros(4), np.eye(4))
        state = MonitorState.initial(4, 0.1)
        pts = run_chart(state, model, np.zeros((20, 4)), cfg())
        assert all(p.r == 0.0 and not p.alarm for p in pts)
        assert not state.tripped

    def test_point_invariants_and_state_bookkeeping(self):
        rng = np.random.default_rng(3)
        model = from_known(np.zeros(5), np.eye(5))
        state = MonitorState.initial(5, 3.0)
        x = rng.normal(size=(30, 5))
        x[10:] += 3.0
        pts = run_chart(state, model, x, cfg())
        for p in pts:
            assert p.r == pytest.approx(p.contributions.sum())
            assert p.alarm == (p.r > 3.0)
        first = next(p.t for p in pts if p.alarm)
        assert state.first_alarm == first
        assert state.t == 30
        assert pts[-1].alarm  # the chart keeps running after an alarm

    def test_chart_matches_block_computation(self):
        rng = np.random.default_rng(4)
        cov = gen_covariance(ScenarioSpec("ar1", 6))
        model = from_known(np.ones(6), cov)
        x = rng.multivariate_normal(np.ones(6), cov, size=25)
        c = cfg(ewma_variance_mode="exact_time_varying")
        pts = run_chart(MonitorState.initial(6, 1e9), model, x, c)
        ys = (x - 1.0) @ model.eigvecs / np.sqrt(model.eigvals)
        r, _ = ewma_r_block(ys, c, np.zeros(6), 1)
        np.testing.assert_allclose([p.r for p in pts], r, rtol=1e-10)

    def test_large_shift_detected_immediately(self):
        p = 100
        spec = ScenarioSpec("random_wishart", p, seed=5)
        cov = gen_covariance(spec)
        model = from_known(np.zeros(p), cov)
        c = MonitorConfig(gamma=0.4, nu=nu_from_significance(0.05), target_arl=200)
        r0 = control_limit_montecarlo(p, c, reps=300, seed=0).r0
        root = model.eigvecs * np.sqrt(model.eigvals)
        rng = np.random.default_rng(6)
        first_step = 0
        for _ in range(40):
            mu = np.zeros(p)
            mu[rng.choice(p, 20, replace=False)] = 1.0
            x = rng.standard_normal((50, p)) @ root.T
            x[49] += mu
            state = MonitorState.initial(p, r0)
            pts = run_chart(state, model, x, c)
            first_step += pts[49].alarm
        assert first_step >= 36

    def test_nu_zero_d_has_unit_mean(self):
        c = MonitorConfig(gamma=0.4, nu=0.0, target_arl=100)
        rng = np.random.default_rng(8)
        y = rng.standard_normal((10_000, 100))
        z = ewma_loop(y[:200], 0.4)  # burn-in
        r, _ = ewma_r_block(y[200:], c, z[-1], 201)
        assert r.sum() / (100 * r.size) == pytest.approx(1.0, rel=0.03)

    def test_in_control_run_length_matches_target(self):
        c = MonitorConfig(gamma=0.4, nu=0.5, target_arl=100)
        r0 = control_limit_montecarlo(8, c, reps=800, seed=3).r0
        model = from_known(np.zeros(8), gen_covariance(ScenarioSpec("ar1", 8)))
        root = model.eigvecs * np.sqrt(model.eigvals)
        rls = []
        for rep in range(400):
            rng = rep_rng(500, rep)
            state = MonitorState.initial(8, r0)
            while not state.tripped and state.t < 2000:
                monitor_step(state, model, root @ rng.standard_normal(8), c)
            rls.append(state.first_alarm or 2001)
        mean = np.mean(rls)
        se = np.std(rls, ddof=1) / math.sqrt(len(rls))
        assert abs(mean - 100) < 3 * se + 5
