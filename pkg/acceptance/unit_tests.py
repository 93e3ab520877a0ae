import math
import os
import sys
import unittest
from pathlib import Path

sys.path.insert(0, str(Path(__file__).absolute().parent.parent / 'src'))
sys.path.insert(0, str(Path(__file__).absolute().parent))

from exercises import WhiteNoiseTypeOne, binomial_band  # noqa: E402
from graders import CompoundGrader, Fail, NearValue, Pass  # noqa: E402
from inference import ExperimentReport, ExperimentRow, TypeOneRow  # noqa: E402
from playlist import make_default_playlist  # noqa: E402


class GraderTest(unittest.TestCase):
    """Graders on a hand-made report, so they are checked without a Monte Carlo run."""

    def setUp(self):
        self.reports = {'1': ExperimentReport('M', '2x2', 2, 0, [
            ExperimentRow('1x1', 'constant', 'none', 11.5, 2.0, -0.06, 3.99, 0),
            ExperimentRow('2x2', 'constant', 'none', 11.6, 1.9, 0.04, 3.6, 0),
        ])}

    def test_near_value(self):
        self.assertIsInstance(NearValue('1', {'m': '2x2'}, 'rmse', 1.8478, rel_tol=0.07).grade(self.reports), Pass)
        self.assertIsInstance(NearValue('1', {'m': '1x1'}, 'rmse', 1.8478, rel_tol=0.07).grade(self.reports), Fail)

    def test_compound_fails_on_any_failure(self):
        grader = CompoundGrader([
            NearValue('1', {'m': '2x2'}, 'mean', 11.5924, abs_tol=0.15),
            NearValue('1', {'m': '1x1'}, 'mean', 20.0, abs_tol=0.15),
        ])
        self.assertIsInstance(grader.grade(self.reports), Fail)

    def test_white_noise_band(self):
        low, high = binomial_band(0.05, 2000)
        self.assertAlmostEqual(low, 0.05 - 3 * math.sqrt(0.0475 / 2000))
        self.assertAlmostEqual(high, 0.0646, places=4)
        exercise = WhiteNoiseTypeOne('white', reps=400)
        reports = {key: ExperimentReport('white', '100x100', 400, 0, [TypeOneRow('white', '100x100', 'none', 0.05,
                                                                                 rate, int(rate * 400), 0)])
                   for key, rate in (('white', 0.055), ('white-known', 0.09))}
        self.assertIsInstance(exercise.grader.grade(reports), Fail)
        reports['white-known'].rows[0].rate = 0.04
        self.assertIsInstance(exercise.grader.grade(reports), Pass)


@unittest.skipUnless(os.environ.get('LRV_ACCEPTANCE') == '1', 'set LRV_ACCEPTANCE=1 to run the Monte Carlo playlist')
class AcceptanceTest(unittest.TestCase):
    """
    Runs every exercise of the default playlist at full replication counts. This takes a long time; set
    LRV_ACCEPTANCE_THREADS to use several processes.
    """

    def test_playlist(self):
        for exercise in make_default_playlist():
            with self.subTest(exercise=exercise.name):
                grade = exercise.grader.grade(exercise.run())
                self.assertIsInstance(grade, Pass, grade.reason if grade else 'no grade')


if __name__ == '__main__':
    unittest.main()
