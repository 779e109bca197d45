import math

import numpy as np
import pytest

from quotefilter import (
    ExpIntensity,
    GaussianPrior,
    GridDensity,
    IntensityClip,
    NonFiniteIntegral,
    PriceModel,
    Quotes,
    TradeEvent,
    Side,
    characteristic_time,
    evaluate,
    property_a_residual,
    property_b_residual,
)
from quotefilter.model import decomposition_misfit


class TestExpIntensity:
    def test_at_zero_distance_equals_base_rate(self, intensity):
        assert evaluate(intensity, 0.0) == 50.0

    def test_decay_half_efold(self, intensity):
        assert evaluate(intensity, 0.1) == pytest.approx(30.32653298563167, rel=1e-12)

    def test_grows_in_the_money(self, intensity):
        assert evaluate(intensity, -0.1) == pytest.approx(82.43606353500642, rel=1e-12)

    def test_strictly_decreasing_random_pairs(self, intensity):
        rng = np.random.default_rng(3)
        d = rng.uniform(-2.0, 2.0, size=(1000, 2))
        lo, hi = d.min(axis=1), d.max(axis=1)
        keep = lo < hi
        assert np.all(evaluate(intensity, lo[keep]) > evaluate(intensity, hi[keep]))

    def test_strictly_convex(self, intensity):
        d = np.linspace(-1.0, 1.0, 101)
        vals = evaluate(intensity, d)
        assert np.all(np.diff(vals, 2) > 0)

    @pytest.mark.parametrize("lambda0,a", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_rejects_nonpositive_parameters(self, lambda0, a):
        with pytest.raises(ValueError):
            ExpIntensity(lambda0, a)


class TestCharacteristicTime:
    def test_zero_spread(self, intensity):
        assert characteristic_time(intensity, 0.0) == pytest.approx(0.01, rel=1e-15)

    def test_base_parameters(self, intensity):
        assert characteristic_time(intensity, 0.1) == pytest.approx(
            0.016487212707001282, rel=1e-12
        )

    def test_log_two_spread(self):
        assert characteristic_time(ExpIntensity(1.0, 1.0), math.log(2.0)) == pytest.approx(
            1.0, rel=1e-15
        )

    def test_monotonicity(self):
        # increasing in the spread and in a (for delta > 0), decreasing in lambda0
        rng = np.random.default_rng(11)
        for _ in range(200):
            lam0, a = rng.uniform(1, 100), rng.uniform(0.5, 30)
            d1, d2 = sorted(rng.uniform(1e-3, 1.0, size=2))
            if d1 == d2:
                continue
            base = ExpIntensity(lam0, a)
            assert characteristic_time(base, d1) < characteristic_time(base, d2)
            assert characteristic_time(base, d1) < characteristic_time(
                ExpIntensity(lam0, a * 1.5), d1
            )
            assert characteristic_time(ExpIntensity(lam0 * 2, a), d1) < characteristic_time(
                base, d1
            )

    def test_rejects_negative_spread(self, intensity):
        with pytest.raises(ValueError):
            characteristic_time(intensity, -0.01)


@pytest.fixture
def unit_gaussian_grid():
    return GridDensity.from_gaussian(GaussianPrior(0.0, 1.0), -8.0, 16.0 / 8000, 8001)


class TestPropertyA:
    def test_exponential_is_quote_free(self, intensity, unit_gaussian_grid):
        res = property_a_residual(intensity, unit_gaussian_grid, [-1.0, 0.0, 1.0])
        assert res < 1e-10

    def test_logistic_is_not(self, unit_gaussian_grid):
        logistic = lambda d: 1.0 / (1.0 + np.exp(d))
        res = property_a_residual(logistic, unit_gaussian_grid, [-1.0, 1.0])
        assert res > 1e-3
        assert res == pytest.approx(0.10276973003888734, rel=1e-6)

    def test_single_quote_level_trivially_zero(self, intensity, unit_gaussian_grid):
        assert property_a_residual(intensity, unit_gaussian_grid, [0.3]) == 0.0

    def test_vanishing_normalizer_raises(self, unit_gaussian_grid):
        with pytest.raises(NonFiniteIntegral):
            property_a_residual(lambda d: 0.0 * d, unit_gaussian_grid, [0.0, 1.0])


class TestPropertyB:
    def test_exponential_identity(self, intensity):
        rng = np.random.default_rng(5)
        triples = []
        for _ in range(200):
            mid = rng.uniform(-1, 1)
            delta = rng.uniform(0.0, 0.3)
            x = mid + rng.uniform(-0.8, 0.8)
            triples.append((x, mid + delta, mid - delta))
        assert property_b_residual(intensity, triples) < 1e-12

    def test_minimum_at_mid(self, intensity):
        assert property_b_residual(intensity, [(100.0, 100.1, 99.9)]) < 1e-12

    def test_rejects_crossed_quotes(self, intensity):
        with pytest.raises(ValueError):
            property_b_residual(intensity, [(0.0, -0.1, 0.1)])

    def test_rational_intensity_fails_fourth_point(self):
        lam0, a = 50.0, 5.0
        rational = lambda d: lam0 / (1.0 + a * d)
        mis = decomposition_misfit(rational, mid=0.0, y1=0.05, y2=0.1, d1=0.05, d2=0.12)
        assert mis > 0.1
        assert mis == pytest.approx(0.38593788593789213, rel=1e-6)

    def test_exponential_fits_fourth_point(self, intensity):
        exp_lam = lambda d: intensity.lambda0 * math.exp(-intensity.a * d)
        assert decomposition_misfit(exp_lam, 0.0, 0.05, 0.1, 0.05, 0.12) < 1e-10


class TestDomainTypes:
    def test_quotes_accessors(self):
        q = Quotes(bid=99.9, ask=100.1)
        assert q.mid == pytest.approx(100.0)
        assert q.half_spread == pytest.approx(0.1)

    def test_quotes_allow_degenerate_spread(self):
        q = Quotes(bid=100.0, ask=100.0)
        assert q.half_spread == 0.0

    def test_quotes_reject_crossed(self):
        with pytest.raises(ValueError):
            Quotes(bid=100.1, ask=99.9)

    def test_price_model_rejects_negative_vol(self):
        with pytest.raises(ValueError):
            PriceModel(sigma=-0.1)

    def test_prior_requires_positive_sigma(self):
        with pytest.raises(ValueError):
            GaussianPrior(0.0, 0.0)

    def test_trade_event_sign(self):
        assert TradeEvent(1.0, Side.ASK).sign == 1
        assert TradeEvent(1.0, Side.BID).sign == -1

    def test_clip_default_is_ten_efolds(self, intensity):
        clip = IntensityClip()
        assert clip.lam_max(intensity) == pytest.approx(50.0 * math.e ** 10, rel=1e-12)

    def test_clip_applies_floor_and_cap(self, intensity):
        clip = IntensityClip(lam_min=1e-8, w_clip=0.2)
        assert clip.clip(intensity, 1e-12) == 1e-8
        assert clip.clip(intensity, 1e9) == pytest.approx(50.0 * math.exp(1.0))
