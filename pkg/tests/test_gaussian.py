import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from quotefilter import (
    ExpIntensity,
    GaussianPrior,
    GaussianState,
    IntensityClip,
    PricePath,
    Quotes,
    Side,
    TradeEvent,
    average_impact,
    characteristic_time,
    evolve_mean,
    impact_no_info,
    replica_rng,
    simulate_trades,
    stationary_variance,
    variance_at,
)
from quotefilter.gaussian import (
    advance_state,
    apply_event,
    impact_overlay_jumpsum,
    trajectory,
    variance_ode_rhs,
)

DELTA = 0.1


class TestVarianceAt:
    def test_time_zero_is_prior_variance(self, intensity, prior):
        assert variance_at(prior, intensity, DELTA, 0.0, 0.0) == prior.variance
        assert variance_at(prior, intensity, DELTA, 0.06, 0.0) == pytest.approx(
            prior.variance, rel=1e-14
        )

    def test_zero_vol_closed_form(self, intensity, prior, t1):
        t = 0.5
        expected = 1.0 / (1.0 / prior.variance + intensity.a ** 2 * t / t1)
        assert variance_at(prior, intensity, DELTA, 0.0, t) == pytest.approx(expected, rel=1e-14)

    def test_limit_is_stationary_variance(self, intensity, prior, base_sigma):
        sinf2 = stationary_variance(intensity, DELTA, base_sigma)
        assert sinf2 == pytest.approx(1.54083e-3, rel=1e-5)
        assert variance_at(prior, intensity, DELTA, base_sigma, 50.0) == pytest.approx(
            sinf2, rel=1e-12
        )

    def test_fixed_point_is_constant(self, intensity, base_sigma):
        sinf2 = stationary_variance(intensity, DELTA, base_sigma)
        prior = GaussianPrior(0.0, math.sqrt(sinf2))
        for t in (0.0, 0.3, 5.0):
            assert variance_at(prior, intensity, DELTA, base_sigma, t) == pytest.approx(
                sinf2, rel=1e-12
            )
            assert variance_at(
                prior, intensity, DELTA, base_sigma, t, paper_form=True
            ) == pytest.approx(sinf2, rel=1e-12)

    def test_matches_ode_integration(self, intensity, base_sigma):
        # from above and below the fixed point
        for sigma0 in (0.05, 0.02):
            prior = GaussianPrior(0.0, sigma0)
            sol = solve_ivp(
                lambda _t, y: [variance_ode_rhs(y[0], intensity, DELTA, base_sigma)],
                [0.0, 2.0],
                [prior.variance],
                rtol=1e-12,
                atol=1e-16,
                dense_output=True,
            )
            ts = np.linspace(0.0, 2.0, 101)
            closed = [variance_at(prior, intensity, DELTA, base_sigma, float(t)) for t in ts]
            np.testing.assert_allclose(closed, sol.sol(ts)[0], rtol=1e-9)

    def test_monotone_approach(self, intensity, base_sigma):
        sinf2 = stationary_variance(intensity, DELTA, base_sigma)
        ts = np.linspace(0.0, 1.0, 200)
        above = np.array(
            [variance_at(GaussianPrior(0.0, 0.05), intensity, DELTA, base_sigma, t) for t in ts]
        )
        below = np.array(
            [variance_at(GaussianPrior(0.0, 0.02), intensity, DELTA, base_sigma, t) for t in ts]
        )
        assert np.all(np.diff(above) < 0) and np.all(above > sinf2)
        assert np.all(np.diff(below) > 0) and np.all(below < sinf2)

    def test_paper_form_anchored_but_not_a_solution(self, intensity, base_sigma):
        # the near-equilibrium form matches at t=0 and t=inf but not between
        prior = GaussianPrior(0.0, 0.05)
        assert variance_at(prior, intensity, DELTA, base_sigma, 0.0, paper_form=True) == (
            pytest.approx(prior.variance, rel=1e-12)
        )
        exact = variance_at(prior, intensity, DELTA, base_sigma, 0.3)
        lit = variance_at(prior, intensity, DELTA, base_sigma, 0.3, paper_form=True)
        assert abs(lit - exact) / exact > 0.01


class TestEvolveMean:
    def test_pegged_mid_keeps_mean_constant(self, intensity, prior, base_sigma):
        state = GaussianState(prior.x0, prior.variance)
        out = evolve_mean(state, intensity, DELTA, base_sigma, [], 2.0, mid=None)
        assert out.mean == prior.x0
        assert out.t == 2.0

    def test_fixed_quotes_relax_to_mid(self, intensity, prior, t1):
        # with sigma = 0 the pull toward the mid is algebraic: the residual
        # offset decays like t1 / (a^2 sigma0^2 t)
        offset = 0.04
        state = GaussianState(prior.x0 + offset, prior.variance)
        out = evolve_mean(state, intensity, DELTA, 0.0, [], 1e4, mid=prior.x0)
        expected_residual = offset / (
            1.0 + prior.variance * intensity.a ** 2 * 1e4 / t1
        )
        assert out.mean - prior.x0 == pytest.approx(expected_residual, rel=1e-9)
        assert abs(out.mean - prior.x0) < 2e-6

    def test_event_jump_size(self, intensity, prior, base_sigma):
        state = GaussianState(prior.x0, prior.variance)
        out = apply_event(state, intensity, +1)
        assert out.mean - prior.x0 == pytest.approx(intensity.a * prior.variance, rel=1e-15)

    def test_ask_bid_pair_cancels(self, intensity, prior, base_sigma):
        state = GaussianState(prior.x0, prior.variance)
        events = [TradeEvent(0.5, Side.ASK), TradeEvent(0.5, Side.BID)]
        out = evolve_mean(state, intensity, DELTA, base_sigma, events, 1.0, mid=None)
        assert out.mean == pytest.approx(prior.x0, abs=1e-15)

    def test_meta_event_leaves_variance_unchanged(self, intensity, prior, base_sigma):
        state = GaussianState(prior.x0, prior.variance)
        no_meta = evolve_mean(state, intensity, DELTA, base_sigma, [], 1.0, mid=None)
        meta = [TradeEvent(k / 10.0, Side.ASK) for k in range(1, 11)]
        with_meta = evolve_mean(state, intensity, DELTA, base_sigma, meta, 1.0, mid=None)
        assert with_meta.variance == pytest.approx(no_meta.variance, rel=1e-14)
        assert with_meta.mean > no_meta.mean

    def test_fixed_quote_event_limit_matches_flow(self, intensity, t1):
        # with fixed quotes and trades from a frozen efficient price, the
        # mean settles near mid + sinh(a (S - mid)) / a
        mid, s_true = 0.0, 0.05
        limit = mid + math.sinh(intensity.a * (s_true - mid)) / intensity.a
        quotes = Quotes.around(mid, DELTA)
        frozen = PricePath(np.array([0.0, 1e3 * t1]), np.array([s_true, s_true]))
        clip = IntensityClip(w_clip=1.0 / intensity.a)
        finals = []
        for i in range(40):
            rng = replica_rng(99, i)
            trades = simulate_trades(
                frozen, lambda _t: quotes, intensity, 1e3 * t1, rng, clip=clip
            )
            st = evolve_mean(
                GaussianState(0.02, 0.05 ** 2), intensity, DELTA, 0.0,
                trades, 1e3 * t1, mid=mid,
            )
            finals.append(st.mean)
        se = np.std(finals, ddof=1) / math.sqrt(len(finals))
        assert abs(np.mean(finals) - limit) < 3 * se

    def test_trajectory_rows_are_time_ordered(self, intensity, prior, base_sigma):
        events = [TradeEvent(0.2, Side.ASK), TradeEvent(0.5, Side.BID)]
        rows = trajectory(
            GaussianState(prior.x0, prior.variance), intensity, DELTA, base_sigma,
            events, times=np.linspace(0.1, 1.0, 10), mid=None,
        )
        ts = [r[0] for r in rows]
        assert ts == sorted(ts)

    def test_advance_rejects_negative_duration(self, intensity, prior):
        with pytest.raises(ValueError):
            advance_state(GaussianState(0.0, 1.0), intensity, DELTA, 0.0, -1.0)


class TestImpactNoInfo:
    def test_zero_at_time_zero(self, intensity, prior, base_sigma):
        assert impact_no_info(prior, intensity, DELTA, base_sigma, 10.0, 0.0) == 0.0

    def test_zero_vol_log_shape_vs_jump_sum(self, intensity, prior, t1):
        beta, t = 1e4, 1.0
        closed = impact_no_info(prior, intensity, DELTA, 0.0, beta, t)
        target = (beta * t1 / intensity.a) * math.log1p(
            intensity.a ** 2 * prior.variance * t / t1
        )
        assert closed == pytest.approx(target, rel=1e-12)
        jump_sum = sum(
            intensity.a * variance_at(prior, intensity, DELTA, 0.0, k / beta)
            for k in range(1, int(beta * t) + 1)
        )
        assert abs(closed - jump_sum) / jump_sum < 1e-2

    def test_long_run_linear_slope(self, intensity, base_sigma, t1):
        sinf2 = stationary_variance(intensity, DELTA, base_sigma)
        prior = GaussianPrior(0.0, math.sqrt(sinf2))
        beta = 10.0
        slope = (
            impact_no_info(prior, intensity, DELTA, base_sigma, beta, 10.01)
            - impact_no_info(prior, intensity, DELTA, base_sigma, beta, 10.0)
        ) / 0.01
        assert slope == pytest.approx(beta * base_sigma * math.sqrt(t1), rel=1e-2)

    def test_meta_end_caps_accumulation(self, intensity, prior, base_sigma):
        v1 = impact_no_info(prior, intensity, DELTA, base_sigma, 10.0, 3.0, T=1.0)
        v2 = impact_no_info(prior, intensity, DELTA, base_sigma, 10.0, 1.0, T=1.0)
        assert v1 == v2

    def test_paper_form_matches_its_own_quadrature(self, intensity, prior, base_sigma):
        lit = impact_no_info(prior, intensity, DELTA, base_sigma, 10.0, 1.5, paper_form=True)
        q, _ = quad(
            lambda s: 10.0
            * intensity.a
            * variance_at(prior, intensity, DELTA, base_sigma, s, paper_form=True),
            0.0,
            1.5,
            limit=200,
        )
        assert lit == pytest.approx(q, rel=1e-10)


class TestAverageImpact:
    def test_learning_converges_to_true_price(self, intensity, prior):
        s0 = prior.x0 + 0.08
        a_t, _ = average_impact(prior, intensity, DELTA, 0.0, 0.0, s0, 1e6)
        assert a_t == pytest.approx(s0, rel=1e-6)

    def test_centered_prior_has_flat_learning(self, intensity, base_sigma):
        sinf2 = stationary_variance(intensity, DELTA, base_sigma)
        prior = GaussianPrior(100.0, math.sqrt(sinf2))
        for t in (0.0, 0.5, 3.0):
            a_t, _ = average_impact(prior, intensity, DELTA, base_sigma, 10.0, 100.0, t)
            assert a_t == pytest.approx(100.0, rel=1e-14)

    def test_zero_vol_weights(self, intensity, prior, t1):
        t, s0 = 0.7, 101.0
        tau = t1 / (prior.variance * intensity.a ** 2)
        expected = (tau * prior.x0 + t * s0) / (tau + t)
        a_t, _ = average_impact(prior, intensity, DELTA, 0.0, 0.0, s0, t)
        assert a_t == pytest.approx(expected, rel=1e-12)

    def test_stationary_impact_saturates(self, intensity, base_sigma, t1):
        sinf2 = stationary_variance(intensity, DELTA, base_sigma)
        prior = GaussianPrior(100.0, math.sqrt(sinf2))
        beta = 10.0
        k = intensity.a * base_sigma / math.sqrt(t1)
        for t in (0.2, 1.0, 4.0):
            _, b_t = average_impact(prior, intensity, DELTA, base_sigma, beta, 100.0, t)
            expected = (beta * t1 / intensity.a) * (1.0 - math.exp(-k * t))
            assert b_t == pytest.approx(expected, rel=1e-12)
        _, b_inf = average_impact(prior, intensity, DELTA, base_sigma, beta, 100.0, 100.0)
        assert b_inf == pytest.approx(beta * t1 / intensity.a, rel=1e-9)

    def test_finite_meta_order_decays_after_t_cap(self, intensity, base_sigma, t1):
        sinf2 = stationary_variance(intensity, DELTA, base_sigma)
        prior = GaussianPrior(100.0, math.sqrt(sinf2))
        beta, t_cap = 10.0, 0.5
        k = intensity.a * base_sigma / math.sqrt(t1)
        t = 2.0
        _, b_t = average_impact(prior, intensity, DELTA, base_sigma, beta, 100.0, t, T=t_cap)
        expected = (beta * t1 / intensity.a) * math.exp(-k * t) * (math.exp(k * t_cap) - 1.0)
        assert b_t == pytest.approx(expected, rel=1e-12)

    def test_jumpsum_overlay_matches_large_beta_form(self, intensity, base_sigma):
        # with many small jumps the staircase overlay approaches the integral
        sinf2 = stationary_variance(intensity, DELTA, base_sigma)
        prior = GaussianPrior(100.0, math.sqrt(sinf2))
        beta, T = 2000.0, 1.0
        times = [0.3, 0.7, 1.0, 1.5]
        stairs = impact_overlay_jumpsum(
            prior, intensity, DELTA, base_sigma, beta, 100.0, T, times
        )
        for t, stair in zip(times, stairs):
            _, b = average_impact(prior, intensity, DELTA, base_sigma, beta, 100.0, t, T=T)
            assert stair == pytest.approx(b, rel=2e-3)
