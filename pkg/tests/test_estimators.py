import itertools
import math
import unittest

import numpy as np

from errors import ZeroOverlapError
from estimators import (LOGGER, NO_CUT, RATE_WARNING_MEMORY, AutocovBox, CutKind, CutRule, _warn_rate,
                        _warn_rate_once, cut_threshold, lrv_estimate, lrv_estimate_centered, sample_autocov,
                        threshold_lrv)
from util.grid import Field, lag_box
from util.kernels import KernelSpec


def brute_autocov(x: np.ndarray, lag) -> np.ndarray:
    shape, p = x.shape[:-1], x.shape[-1]
    total = np.zeros((p, p))
    count = 0
    for i in itertools.product(*(range(n) for n in shape)):
        k = tuple(a + b for a, b in zip(i, lag))
        if all(0 <= c < n for c, n in zip(k, shape)):
            total += np.outer(x[i], x[k])
            count += 1
    return total / count


def brute_lrv(x: np.ndarray, m) -> np.ndarray:
    return sum(brute_autocov(x, lag.j) for lag in lag_box(m))


def brute_centered(x: np.ndarray, m) -> np.ndarray:
    """Both factors centred at the temporal mean of the base site, constant weights."""
    shape, p = x.shape[:-1], x.shape[-1]
    means = x.mean(axis=0)
    total = np.zeros((p, p))
    for lag in lag_box(m):
        acc = np.zeros((p, p))
        count = 0
        for i in itertools.product(*(range(n) for n in shape)):
            k = tuple(a + b for a, b in zip(i, lag.j))
            if all(0 <= c < n for c, n in zip(k, shape)):
                site_mean = means[i[1:]]
                acc += np.outer(x[i] - site_mean, x[k] - site_mean)
                count += 1
        total += acc / count
    return total


def small_shapes(limit: int = 64):
    """Every grid shape with one, two or three axes and at most `limit` sites."""
    for q in (1, 2, 3):
        for shape in itertools.product(range(1, limit + 1), repeat=q):
            if math.prod(shape) <= limit:
                yield shape


class SampleAutocovTest(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_matches_brute_force(self):
        for shape, p in [((8, 8), 1), ((4, 5), 2), ((2, 3, 4), 1), ((16,), 2)]:
            x = self.rng.standard_normal(shape + (p,))
            field = Field.from_array(x, p=p)
            for lag in lag_box(tuple(min(2, n - 1) for n in shape)):
                np.testing.assert_allclose(sample_autocov(field, lag), brute_autocov(x, lag.j), atol=1e-12)

    def test_negative_lag_is_transpose(self):
        field = Field.from_array(self.rng.standard_normal((5, 6, 2)), p=2)
        np.testing.assert_allclose(sample_autocov(field, (-1, 2)), sample_autocov(field, (1, -2)).T, atol=1e-14)

    def test_lag_zero_is_mean_square(self):
        x = self.rng.standard_normal((6, 7))
        self.assertAlmostEqual(float(sample_autocov(Field.from_array(x), (0, 0))[0, 0]), float(np.mean(x ** 2)))

    def test_zero_overlap(self):
        with self.assertRaises(ZeroOverlapError):
            sample_autocov(Field.from_array(np.ones((3, 3))), (3, 0))


class LrvEstimateTest(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(5)

    def test_matches_brute_force(self):
        for shape, p, m in [((8, 8), 1, (2, 3)), ((4, 6), 2, (1, 2)), ((4, 4, 4), 1, (1, 1, 2))]:
            x = self.rng.standard_normal(shape + (p,))
            estimate = lrv_estimate(Field.from_array(x, p=p), m)
            np.testing.assert_allclose(estimate.sigma2, brute_lrv(x, m), atol=1e-11)

    def test_box_gives_every_smaller_m(self):
        x = self.rng.standard_normal((9, 9))
        box = AutocovBox(Field.from_array(x), (4, 4))
        for m in [(0, 0), (1, 2), (4, 4)]:
            self.assertAlmostEqual(box.estimate(m).value, float(brute_lrv(x[..., None], m)[0, 0]), places=11)

    def test_multivariate_estimate_is_symmetric(self):
        field = Field.from_array(self.rng.standard_normal((6, 7, 3)), p=3)
        sigma2 = lrv_estimate(field, (2, 2)).sigma2
        np.testing.assert_allclose(sigma2, sigma2.T, atol=1e-12)

    def test_scaling(self):
        field = Field.from_array(self.rng.standard_normal((7, 8)))
        base = lrv_estimate(field, (2, 2)).value
        self.assertAlmostEqual(lrv_estimate(field.scaled(3.0), (2, 2)).value, 9.0 * base, places=10)

    def test_rejects_m_outside_the_grid(self):
        field = Field.from_array(np.ones((4, 5)))
        with self.assertRaises(ValueError):
            lrv_estimate(field, (4, 1))
        with self.assertRaises(ValueError):
            lrv_estimate(field, (1, 1, 1))

    def test_global_mean_centering(self):
        x = self.rng.standard_normal((6, 6))
        shifted = lrv_estimate(Field.from_array(x + 5.0), (1, 1), center=True).value
        self.assertAlmostEqual(shifted, lrv_estimate(Field.from_array(x - x.mean()), (1, 1)).value, places=10)

    def test_bartlett_weights_lower_the_far_lags(self):
        x = self.rng.standard_normal((10, 10))
        field = Field.from_array(x)
        bartlett = KernelSpec.from_name('bartlett')
        expected = sum((1 - abs(j[0]) / 2) * (1 - abs(j[1]) / 2) * brute_autocov(x[..., None], j.j)[0, 0]
                       for j in lag_box((2, 2)))
        self.assertAlmostEqual(lrv_estimate(field, (2, 2), bartlett).value, expected, places=10)


class SmallFieldTest(unittest.TestCase):
    """AutocovBox against the direct double loop on every small grid, far lags included."""

    REACH = {1: 63, 2: 3, 3: 1}

    def test_every_small_shape(self):
        rng = np.random.default_rng(64)
        for shape in small_shapes():
            m = tuple(min(n - 1, self.REACH[len(shape)]) for n in shape)
            for p in (1, 2):
                x = rng.standard_normal(shape + (p,))
                with self.subTest(shape=shape, p=p):
                    box = AutocovBox(Field.from_array(x, p=p), m)
                    np.testing.assert_allclose(box.estimate(m).sigma2, brute_lrv(x, m), rtol=0, atol=1e-10)

    def test_corner_lag_uses_its_single_pair(self):
        x = np.random.default_rng(6).standard_normal((5, 6))
        box = AutocovBox(Field.from_array(x), (4, 5))
        self.assertAlmostEqual(float(box.gamma((4, 5))[0, 0]), x[0, 0] * x[4, 5], places=14)
        self.assertAlmostEqual(float(box.gamma((-4, 5))[0, 0]), x[4, 0] * x[0, 5], places=14)
        self.assertAlmostEqual(float(box.gamma((4, 0))[0, 0]), float(np.mean(x[:1] * x[4:])), places=14)


class ThresholdTest(unittest.TestCase):

    def setUp(self):
        self.field = Field.from_array(np.random.default_rng(8).standard_normal((10, 12)))

    def test_no_cut_is_bit_identical(self):
        plain = lrv_estimate(self.field, (3, 3))
        cut = threshold_lrv(self.field, (3, 3), rule=NO_CUT)
        self.assertEqual(plain.value, cut.value)
        self.assertEqual(cut.kept_lags, 49)

    def test_thresholds(self):
        self.assertAlmostEqual(cut_threshold(CutRule.power_l2(2.0), (3, 4), (10, 10)), 25 / 100 - 1e-4)
        self.assertAlmostEqual(cut_threshold(CutRule.power_max(2.0), (3, 4), (10, 10)), 16 / 100 - 1e-4)
        self.assertEqual(cut_threshold(CutRule.constant(0.2), (3, 4), (10, 10)), 0.2)
        self.assertEqual(cut_threshold(NO_CUT, (3, 4), (10, 10)), -math.inf)

    def test_alpha_zero_is_one_threshold_for_every_lag(self):
        estimate = threshold_lrv(self.field, (1, 1), rule=CutRule.power_l2(0.0))
        box = AutocovBox(self.field, (1, 1))
        expected = sum(float(box.gamma(j)[0, 0]) for j in lag_box((1, 1))
                       if abs(float(box.gamma(j)[0, 0])) > 1 / 120 - 1e-4)
        self.assertAlmostEqual(estimate.value, expected, places=12)

    def test_huge_constant_cut_keeps_nothing(self):
        estimate = threshold_lrv(self.field, (2, 2), rule=CutRule.constant(1e9))
        self.assertEqual(estimate.value, 0.0)
        self.assertEqual(estimate.kept_lags, 0)

    def test_large_alpha_cuts_beyond_the_first_ring(self):
        rule = CutRule.power_max(20.0)
        wide = threshold_lrv(self.field, (2, 2), rule=rule)
        narrow = threshold_lrv(self.field, (1, 1), rule=rule)
        self.assertEqual(wide.kept_lags, narrow.kept_lags)
        self.assertAlmostEqual(wide.value, narrow.value, places=12)

    def test_thresholds_do_not_scale_with_the_field(self):
        rule = CutRule.constant(0.05)
        self.assertGreater(threshold_lrv(self.field, (1, 1), rule=rule).kept_lags, 0)
        self.assertEqual(threshold_lrv(self.field.scaled(0.01), (1, 1), rule=rule).kept_lags, 0)

    def test_rule_from_name(self):
        self.assertIs(CutRule.from_name('POWER_L2', 2.0).kind, CutKind.POWER_L2)
        with self.assertRaises(ValueError):
            CutRule.from_name('soft')
        with self.assertRaises(ValueError):
            CutRule.power_l2(-1.0)


class TemporalCenteringTest(unittest.TestCase):

    def test_site_constant_in_time_gives_zero(self):
        spatial = np.random.default_rng(2).standard_normal((5, 6))
        field = Field.from_array(np.broadcast_to(spatial, (4, 5, 6)))
        self.assertAlmostEqual(lrv_estimate_centered(field, (1, 1, 1)).value, 0.0, places=12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(21)
        for shape, p, m in [((2, 2, 1), 1, (1, 1, 0)), ((3, 2, 2), 1, (2, 1, 1)), ((3, 2, 2), 2, (1, 1, 1))]:
            x = rng.standard_normal(shape + (p,))
            with self.subTest(shape=shape, p=p):
                estimate = lrv_estimate_centered(Field.from_array(x, p=p), m)
                np.testing.assert_allclose(estimate.sigma2, brute_centered(x, m), rtol=0, atol=1e-12)

    def test_spatial_lags_of_a_product_field(self):
        # xi_(t,s) = e_t S_s: with m_1 = 0 centring only swaps sum e_t^2 for sum (e_t - mean e)^2
        rng = np.random.default_rng(13)
        e = rng.standard_normal(7)
        spatial = rng.standard_normal((6, 5))
        field = Field.from_array(e[:, None, None] * spatial[None])
        ratio = lrv_estimate_centered(field, (0, 2, 2)).value / lrv_estimate(field, (0, 2, 2)).value
        self.assertAlmostEqual(ratio, float(np.sum((e - e.mean()) ** 2) / np.sum(e ** 2)), places=12)

    def test_needs_a_time_axis(self):
        with self.assertRaises(ValueError):
            lrv_estimate_centered(Field.from_array(np.ones(8)), (1,))


class RateWarningTest(unittest.TestCase):

    def setUp(self):
        _warn_rate_once.cache_clear()

    def test_warns_once_per_truncation_and_shape(self):
        field = Field.from_array(np.random.default_rng(1).standard_normal((5, 6)))
        with self.assertLogs(LOGGER, 'WARNING') as logs:
            lrv_estimate(field, (2, 2))
            lrv_estimate(field, (2, 2))
            lrv_estimate(field, (2, 1))
        self.assertEqual(len(logs.output), 2)

    def test_memory_is_bounded(self):
        with self.assertLogs(LOGGER, 'WARNING'):
            for n in range(10, 10 + 2 * RATE_WARNING_MEMORY):
                _warn_rate((5, 5), (n, n))
        self.assertEqual(_warn_rate_once.cache_info().currsize, RATE_WARNING_MEMORY)



if __name__ == '__main__':
    unittest.main()
