import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from experiments import preset
from inference import ExperimentReport, type1_error_sweep
from models import white_noise

from graders import (ArgMin, CloseTogether, CompoundGrader, Grader, InRange, Monotone, NearValue, Smaller)

Playlist = List['Exercise']

SEED = 20240611


@dataclass
class Exercise:
    """
    Runs one or more built-in presets and hands the reports, keyed by table, to the grader.
    reps=None keeps each preset's own default.
    """
    name: str
    tables: Tuple[str, ...]
    grader: Grader
    reps: int = None
    seed: int = SEED
    threads: int = 1

    def run(self) -> Dict[str, ExperimentReport]:
        return {key: preset(key).run(self.reps, self.seed, self.threads) for key in self.tables}


def binomial_band(level: float, reps: int, width: float = 3.0) -> Tuple[float, float]:
    """level +- width binomial standard errors of a rejection rate over reps replications."""
    half = width * math.sqrt(level * (1 - level) / reps)
    return level - half, level + half


@dataclass
class WhiteNoiseTypeOne(Exercise):
    """
    Image test on i.i.d. fields with m = 0, constant weights and no cut, once with the estimated variance and once
    with the known variance 1; both rejection rates should sit at the nominal level.
    """
    tables: Tuple[str, ...] = ('white', 'white-known')
    grader: Optional[Grader] = None
    reps: int = 2000
    level: float = 0.05

    def __post_init__(self):
        if self.grader is None:
            low, high = binomial_band(self.level, self.reps)
            self.grader = CompoundGrader([InRange(key, {'n': '100x100'}, 'rate', low, high) for key in self.tables])

    def run(self) -> Dict[str, ExperimentReport]:
        reports = {}
        for key, known in zip(self.tables, (None, 1.0)):
            report = ExperimentReport(white_noise().describe(), '100x100', self.reps, self.seed,
                                      metadata={'m': '0x0', 'known_sigma2': known})
            report.rows.extend(type1_error_sweep(white_noise(), (100, 100), self.reps, [None], self.level, self.seed,
                                                 m=(0, 0), known_sigma2=known, threads=self.threads))
            reports[key] = report
        return reports


def in_m(*ms):
    return lambda row: row.m in ms


def make_default_playlist() -> Playlist:
    return [
        Exercise('constant kernel lag sweep', ('1',), CompoundGrader([
            NearValue('1', {'m': '2x2'}, 'mean', 11.5924, abs_tol=0.15),
            NearValue('1', {'m': '2x2'}, 'rmse', 1.8478, rel_tol=0.07),
            NearValue('1', {'m': '9x9'}, 'rmse', 9.5736, rel_tol=0.10),
            Monotone('1', 'rmse', select=in_m(*(f"{k}x{k}" for k in range(2, 10)))),
        ]), reps=10000),
        Exercise('quadratic spectral kernel beats constant', ('1', '2'), CompoundGrader([
            NearValue('2', {'m': '2x2'}, 'rmse', 1.7793, rel_tol=0.07),
            Smaller(('2', {'m': '2x2'}, 'rmse'), ('1', {'m': '2x2'}, 'rmse')),
        ]), reps=2000),
        Exercise('cut-off estimator stabilizes', ('3',), CompoundGrader([
            NearValue('3', {'m': m}, 'rmse', 1.7597, rel_tol=0.07) for m in ('2x2', '3x3', '4x4')
        ] + [CloseTogether('3', 'rmse', in_m('2x2', '3x3', '4x4'), 0.02)]), reps=2000),
        Exercise('space-time model', ('6',), CompoundGrader([
            ArgMin('6', 'rmse', 'm', '1x2x2', select=lambda row: row.cut == 'none'),
            NearValue('6', {'m': '1x2x2', 'cut': 'none'}, 'rmse', 0.8432, rel_tol=0.10),
            NearValue('6', {'m': '2x2x2', 'cut': 'power_l2(9.4)'}, 'rmse', 0.7169, rel_tol=0.10),
        ]), reps=1000),
        Exercise('subsampled mean and RMSE', ('8',), CompoundGrader([
            NearValue('8', {'m': '1x1', 'gamma': 0.9}, 'mean_sub', 8.7021, abs_tol=0.15),
            NearValue('8', {'m': '3x3', 'gamma': 0.9}, 'rmse_sub', 2.9771, rel_tol=0.10),
            NearValue('8', {'m': '1x1', 'gamma': 0.9}, 'rmse_sub', 3.5601, rel_tol=0.10),
        ]), reps=2000),
        Exercise('tuned cut exponent', ('alpha',), CompoundGrader([
            InRange('alpha', {'n': '30x40'}, 'alpha_median', 5.0, 5.8),
            InRange('alpha', {'n': '45x60'}, 'alpha_median', 5.7, 6.5),
        ])),
        Exercise('image test type I error', ('10',), CompoundGrader([
            NearValue('10', {'model': 'M2(a1=0.5,a2=0.3,a3=0.1)', 'n': '100x100', 'cut': 'power_l2(3.6)'}, 'rate',
                      0.0518, abs_tol=0.015),
            NearValue('10', {'model': 'M5(rho=0.3,d=40)', 'n': '250x250', 'cut': 'power_l2(3.6)'}, 'rate',
                      0.0572, abs_tol=0.015),
        ]), reps=2000),
        WhiteNoiseTypeOne('i.i.d. type I error'),
        Exercise('estimator consistency', ('consistency',), Monotone('consistency', 'rmse', increasing=False)),
        Exercise('matrix-valued consistency', ('matrix',), Monotone('matrix', 'mean_max_error', increasing=False)),
        Exercise('subsampling interval coverage', ('coverage',),
                 InRange('coverage', {'k': 1}, 'coverage', 0.85, 0.95)),
    ]
