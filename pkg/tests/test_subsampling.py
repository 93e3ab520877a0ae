import unittest

import numpy as np

from errors import BlockStatisticError
from estimators import AutocovBox, CutRule, lrv_estimate, sample_autocov
from subsampling import (STOP_ON_ACCEPT, STOP_ON_REJECT, SubsampleGrid, _rmse, alpha_grid_range, default_m_max,
                         empirical_distribution, enumerate_blocks, make_statistic, ring_statistic, select_m,
                         select_m_detailed, subsample_confidence_interval, subsample_mean, subsample_quantile,
                         subsample_rmse, subsample_values, tune_alpha, tune_alpha_detailed)
from util.grid import Field, ring_lags


def random_field(shape, seed=0) -> Field:
    return Field.from_array(np.random.default_rng(seed).standard_normal(shape))


class GridTest(unittest.TestCase):

    def test_block_shape_from_gamma(self):
        grid = SubsampleGrid.from_gamma((30, 40), 0.9)
        self.assertEqual(grid.b, (21, 27))
        self.assertEqual(grid.counts((30, 40)), (10, 14))
        self.assertEqual(grid.num_blocks((30, 40)), 140)

    def test_stride(self):
        grid = SubsampleGrid((3, 3), (2, 2))
        self.assertEqual(enumerate_blocks((5, 5), grid), [(0, 0), (0, 2), (2, 0), (2, 2)])
        self.assertEqual(grid.num_blocks((6, 6)), 4)

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            SubsampleGrid((0, 3))
        with self.assertRaises(ValueError):
            SubsampleGrid((3, 3), (1,))
        with self.assertRaises(ValueError):
            SubsampleGrid((6, 3)).validate((5, 5))
        with self.assertRaises(ValueError):
            SubsampleGrid.from_gamma((5, 5), 1.5)

    def test_full_block(self):
        field = random_field((4, 5))
        values = subsample_values(field, SubsampleGrid((4, 5)), make_statistic('mean'))
        self.assertEqual(len(values), 1)
        self.assertAlmostEqual(values[0], float(field.values.mean()))


class DistributionTest(unittest.TestCase):

    def test_quantile_is_an_order_statistic(self):
        dist = empirical_distribution(np.arange(1, 101), 0.0, 1.0)
        self.assertEqual(dist.quantile(0.9), 90.0)
        self.assertEqual(dist.quantile(0.001), 1.0)
        small = empirical_distribution([4, 2, 3, 1], 0.0, 1.0)
        self.assertEqual(small.quantile(0.5), 2.0)
        self.assertEqual(small.cdf(2.0), 0.5)
        self.assertEqual(small.cdf(0.5), 0.0)

    def test_quantile_matches_a_sorted_scan(self):
        rng = np.random.default_rng(17)
        samples = [rng.standard_normal(37), rng.integers(-3, 4, size=37).astype(float)]
        for values in samples:
            dist = empirical_distribution(values, 0.5, 2.0)
            ordered = sorted(2.0 * (v - 0.5) for v in values)
            for i in range(1, 100):
                gamma = i / 100
                naive = next(x for x in ordered if sum(v <= x for v in ordered) / len(ordered) >= gamma)
                self.assertEqual(subsample_quantile(dist, gamma), naive, f"gamma={gamma}")

    def test_scaling_and_centering(self):
        dist = empirical_distribution([1.0, 3.0], 2.0, 10.0)
        np.testing.assert_array_equal(dist.values, [-10.0, 10.0])

    def test_invalid_levels(self):
        dist = empirical_distribution([1.0], 0.0, 1.0)
        for gamma in (0.0, 1.0):
            with self.assertRaises(ValueError):
                dist.quantile(gamma)
        with self.assertRaises(ValueError):
            empirical_distribution([], 0.0, 1.0)

    def test_interval_of_a_constant_statistic_is_a_point(self):
        field = Field.from_array(np.full((8, 8), 2.0))
        interval = subsample_confidence_interval(field, SubsampleGrid((4, 4)), make_statistic('mean'), 0.9)
        self.assertEqual((interval.lower, interval.upper), (2.0, 2.0))
        self.assertTrue(interval.contains(2.0))

    def test_failing_statistic_names_the_block(self):
        field = random_field((6, 6))

        def fails_late(block: Field) -> float:
            if block.values[0, 0, 0] == field.values[1, 1, 0]:
                raise ValueError('boom')
            return 0.0
        with self.assertRaises(BlockStatisticError) as ctx:
            subsample_values(field, SubsampleGrid((3, 3)), fails_late)
        self.assertEqual(ctx.exception.origin, (1, 1))
        self.assertEqual(ctx.exception.block_index, 5)


class RmseTest(unittest.TestCase):

    def test_zero_field(self):
        field = Field.from_array(np.zeros((10, 10)))
        self.assertEqual(subsample_rmse(field, SubsampleGrid((5, 5)), (1, 1)), 0.0)

    def test_matches_explicit_blocks(self):
        field = random_field((12, 12), 4)
        grid = SubsampleGrid((6, 6), (3, 3))
        center = lrv_estimate(field, (2, 2)).value
        estimates = [lrv_estimate(field.block(o, grid.b), (1, 1)).value for o in enumerate_blocks(field.shape, grid)]
        expected = np.sqrt(np.mean((np.array(estimates) - center) ** 2))
        self.assertAlmostEqual(subsample_rmse(field, grid, (2, 2), m=(1, 1)), expected, places=10)
        self.assertAlmostEqual(subsample_mean(field, grid, (1, 1)), float(np.mean(estimates)), places=10)

    def test_block_order_does_not_matter(self):
        field = random_field((12, 12), 6)
        flipped = Field.from_array(field.scalar_values()[::-1, ::-1].copy())
        grid = SubsampleGrid((6, 6), (3, 3))
        self.assertAlmostEqual(subsample_rmse(flipped, grid, (2, 2), m=(1, 1)),
                               subsample_rmse(field, grid, (2, 2), m=(1, 1)), places=10)
        estimates = [np.array([[v]]) for v in np.random.default_rng(2).standard_normal(30)]
        shuffled = [estimates[i] for i in np.random.default_rng(3).permutation(30)]
        center = np.array([[0.4]])
        self.assertAlmostEqual(_rmse(shuffled, center), _rmse(estimates, center), places=14)

    def test_m_must_fit_the_block(self):
        with self.assertRaises(ValueError):
            subsample_mean(random_field((10, 10)), SubsampleGrid((4, 4)), (4, 1))


class RingTest(unittest.TestCase):

    def test_ring_zero_is_the_variance_term(self):
        field = random_field((7, 9), 2)
        self.assertAlmostEqual(ring_statistic(field, 0), float(sample_autocov(field, (0, 0))[0, 0]))

    def test_ring_one(self):
        field = random_field((7, 9), 3)
        expected = sum(float(sample_autocov(field, lag)[0, 0]) for lag in ring_lags(1, 2))
        self.assertAlmostEqual(ring_statistic(field, 1), expected, places=12)

    def test_ring_radius_is_checked(self):
        with self.assertRaises(ValueError):
            ring_statistic(random_field((4, 9)), 4)


class SelectMTest(unittest.TestCase):

    def setUp(self):
        self.grid = SubsampleGrid((9, 9))

    def test_default_m_max(self):
        self.assertEqual(default_m_max(self.grid), 3)
        self.assertEqual(default_m_max(SubsampleGrid((2, 5))), 1)

    def test_dependent_field_stops_at_the_first_ring(self):
        ones = Field.from_array(np.ones((12, 12)))
        selection = select_m_detailed(ones, self.grid, 0.9, stop_rule=STOP_ON_REJECT)
        self.assertEqual(selection.m_opt, (0, 0))
        self.assertEqual(selection.stopped_at, 1)
        self.assertEqual(len(selection.intervals), 1)
        self.assertAlmostEqual(selection.intervals[0].estimate, 8.0)

    def test_dependent_field_never_accepts(self):
        ones = Field.from_array(np.ones((12, 12)))
        selection = select_m_detailed(ones, self.grid, 0.9, m_max=2, stop_rule=STOP_ON_ACCEPT)
        self.assertTrue(selection.exhausted)
        self.assertEqual(selection.m_opt, (2, 2))
        self.assertEqual(len(selection.intervals), 2)

    def test_zero_field(self):
        zeros = Field.from_array(np.zeros((12, 12)))
        self.assertEqual(select_m(zeros, self.grid, stop_rule=STOP_ON_REJECT), (3, 3))
        self.assertEqual(select_m(zeros, self.grid, stop_rule=STOP_ON_ACCEPT), (0, 0))

    def test_invalid_arguments(self):
        field = random_field((12, 12))
        with self.assertRaises(ValueError):
            select_m(field, self.grid, m_max=9)
        with self.assertRaises(ValueError):
            select_m(field, self.grid, stop_rule='maybe')
        with self.assertRaises(ValueError):
            select_m(Field.from_array(np.zeros((12, 12, 2)), p=2), self.grid)


class TuneAlphaTest(unittest.TestCase):

    def test_grid(self):
        grid = alpha_grid_range(10, 0.1)
        self.assertEqual(len(grid), 101)
        self.assertEqual(grid[92], 9.2)
        self.assertEqual(grid[-1], 10.0)

    def test_largest_alpha_that_cuts_nothing(self):
        # with unit autocovariances the corner lags of a 5x5 block survive while 2^(alpha/2) < 25.0025
        ones = Field.from_array(np.ones((10, 10)))
        tuning = tune_alpha_detailed(ones, SubsampleGrid((5, 5)), alpha_grid_range(10, 0.1), 0.01, m_opt=(1, 1))
        self.assertEqual(tuning.alpha, 9.2)
        self.assertEqual(tuning.m_opt, (1, 1))
        self.assertIsNone(tuning.selection)
        self.assertGreater(tuning.rmse_by_alpha[9.3], 1.0)

    def test_flat_rmse_picks_the_largest_alpha(self):
        zeros = Field.from_array(np.zeros((10, 10)))
        self.assertEqual(tune_alpha(zeros, SubsampleGrid((5, 5)), [0.0, 1.0, 2.0], m_opt=(1, 1)), 2.0)

    def test_selection_runs_without_m_opt(self):
        zeros = Field.from_array(np.zeros((12, 12)))
        tuning = tune_alpha_detailed(zeros, SubsampleGrid((9, 9)), [0.0, 1.0])
        self.assertEqual(tuning.m_opt, (0, 0))
        self.assertEqual(tuning.selection.stop_rule, STOP_ON_ACCEPT)

    def test_grid_must_start_at_zero(self):
        with self.assertRaises(ValueError):
            tune_alpha(random_field((10, 10)), SubsampleGrid((5, 5)), [1.0, 2.0], m_opt=(1, 1))


class StatisticTest(unittest.TestCase):

    def test_lrv_statistic(self):
        field = random_field((6, 6), 7)
        rule = CutRule.power_l2(2.0)
        statistic = make_statistic('lrv', (1, 1), cut=rule)
        self.assertAlmostEqual(statistic(field), AutocovBox(field, (1, 1)).estimate((1, 1), rule=rule).value)

    def test_unknown(self):
        with self.assertRaises(ValueError):
            make_statistic('median')
        with self.assertRaises(ValueError):
            make_statistic('lrv')


if __name__ == '__main__':
    unittest.main()
