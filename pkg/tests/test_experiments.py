import unittest

from experiments import M1_M_SET, PRESETS, SUBSAMPLING_M_MAX, TYPE_ONE_ALPHAS, diagonal, preset


class PresetTest(unittest.TestCase):

    def test_keys(self):
        for key in ('1', '2', '3', '4', '5', '6', '8', '10'):
            self.assertIn(key, PRESETS)
        self.assertIs(preset(10), PRESETS['10'])
        with self.assertRaises(ValueError):
            preset('7')

    def test_lag_sets(self):
        self.assertEqual(diagonal(2), [(0, 0), (1, 1), (2, 2)])
        self.assertEqual(diagonal(1, q=3, start=1), [(1, 1, 1)])
        self.assertEqual(len(M1_M_SET), 38)
        self.assertEqual(M1_M_SET[29], (29, 29))
        self.assertEqual(TYPE_ONE_ALPHAS[6], 3.6)

    def test_lag_sweep_layout(self):
        report = preset('1').run(reps=2, seed=7)
        self.assertEqual(report.metadata['table'], '1')
        self.assertEqual([row.m for row in report.rows], [f"{k}x{k}" for k in range(10)])
        self.assertTrue(report.to_csv().startswith('m,kernel,cut,mean,rmse,bias,variance,negative\n'))

    def test_m4_sweep_runs_both_cuts(self):
        report = preset('6').run(reps=2, seed=1)
        self.assertEqual(len(report.rows), 14)
        self.assertEqual({row.cut for row in report.rows}, {'none', 'power_l2(9.4)'})

    def test_subsampling_caps_the_selected_centre(self):
        report = preset('8').run(reps=2, seed=3)
        self.assertEqual(report.metadata['m_max'], SUBSAMPLING_M_MAX)
        for pair in report.metadata['m_opt_counts'].split(';'):
            k = int(pair.split(':')[0].split('x')[0])
            self.assertLessEqual(k, SUBSAMPLING_M_MAX)
        self.assertEqual({row.gamma for row in report.rows}, {0.7, 0.8, 0.9})


if __name__ == '__main__':
    unittest.main()
