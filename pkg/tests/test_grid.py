import unittest

import numpy as np

from util.grid import Field, Lag, lag_box, overlap_count, ring_lags


class LagTest(unittest.TestCase):

    def test_same_lag_from_ints_and_tuple(self):
        self.assertEqual(Lag(2, -3), Lag((2, -3)))
        self.assertEqual(hash(Lag(2, -3)), hash(Lag((2, -3))))
        self.assertEqual(-Lag(2, -3), Lag(-2, 3))

    def test_norms(self):
        lag = Lag(3, -4)
        self.assertEqual(lag.star, 4)
        self.assertAlmostEqual(lag.norm(), 5.0)
        self.assertTrue(lag.within((3, 4)))
        self.assertFalse(lag.within((2, 4)))


class OverlapTest(unittest.TestCase):

    def test_overlap_count(self):
        self.assertEqual(overlap_count((30, 40), (0, 0)), 1200)
        self.assertEqual(overlap_count((30, 40), (2, -3)), 28 * 37)
        self.assertEqual(overlap_count((3, 4), (3, 0)), 0)

    def test_overlap_is_symmetric(self):
        for lag in lag_box((3, 2)):
            self.assertEqual(overlap_count((4, 5), lag), overlap_count((4, 5), -lag))

    def test_lag_box_size(self):
        self.assertEqual(len(lag_box((1, 2))), 15)
        self.assertEqual(lag_box((0, 0)), [Lag(0, 0)])

    def test_ring_sizes(self):
        self.assertEqual(ring_lags(0, 2), [Lag(0, 0)])
        self.assertEqual(len(ring_lags(1, 2)), 8)
        self.assertEqual(len(ring_lags(2, 2)), 16)
        self.assertEqual(len(ring_lags(1, 3)), 26)


class FieldTest(unittest.TestCase):

    def test_canonical_order(self):
        field = Field.from_flat((2, 3), 1, [1, 2, 3, 4, 5, 6])
        self.assertEqual(field.shape, (2, 3))
        self.assertEqual(field.p, 1)
        self.assertEqual(field.scalar_values()[1, 0], 4.0)
        np.testing.assert_array_equal(field.data, np.arange(1, 7))

    def test_rejects_non_finite(self):
        with self.assertRaises(ValueError):
            Field.from_array(np.array([[1.0, np.nan]]))

    def test_block(self):
        field = Field.from_array(np.arange(12.0).reshape(3, 4))
        block = field.block((1, 1), (2, 2))
        np.testing.assert_array_equal(block.scalar_values(), [[5, 6], [9, 10]])
        with self.assertRaises(ValueError):
            field.block((2, 0), (2, 2))

    def test_values_are_read_only(self):
        field = Field.from_array(np.zeros((2, 2)))
        with self.assertRaises(ValueError):
            field.values[0, 0, 0] = 1.0


if __name__ == '__main__':
    unittest.main()
