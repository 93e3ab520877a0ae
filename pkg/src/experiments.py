"""
Built-in experiment presets, one per reproducible results table. Each preset is a fixed parameterization of the
harnesses in inference.py; `reproduce --table KEY` runs one of them.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

from estimators import NO_CUT, AutocovBox, CutRule
from inference import (ExperimentReport, alpha_tuning_experiment, coverage_experiment, format_vector,
                       matrix_consistency_experiment, mc_experiment, run_replications, subsampling_experiment,
                       summarize, type1_error_sweep)
from models import M1, M5, ModelSpec, VectorMix, m1_default, m2_default, m4_default, simulate
from subsampling import alpha_grid_range
from util.kernels import CONSTANT, KernelKind, KernelSpec
from util.rng import SeedSpec

M1_SHAPE = (30, 40)
M4_SHAPE = (20, 30, 40)
QS_BANDWIDTH = 6.4
M1_CUT_ALPHA = 5.8
M4_CUT_ALPHA = 9.4

QS = KernelSpec(KernelKind.QUADRATIC_SPECTRAL, QS_BANDWIDTH)


def diagonal(stop: int, q: int = 2, start: int = 0) -> List[tuple]:
    return [(k,) * q for k in range(start, stop + 1)]


# Equal pairs 0..29 plus the unequal pairs examined for fields of shape (30, 40).
M1_M_SET = diagonal(29) + [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (10, 13), (15, 20)]
M4_M_LIST = [(0, 0, 0), (1, 1, 1), (1, 2, 2), (2, 2, 2), (3, 3, 3), (4, 4, 4), (5, 5, 5)]
SUBSAMPLING_M_LIST = [(0, 0), (1, 1), (3, 3), (4, 4), (6, 6), (7, 7)]
# Largest ring tested when a replication selects its centring m_opt.
SUBSAMPLING_M_MAX = 5
WEIGHT_SWEEP = (0.01, 0.1, 0.3, 0.5, 0.7, 0.9)
TYPE_ONE_ALPHAS = tuple(round(3.0 + 0.1 * i, 1) for i in range(10))
TYPE_ONE_SIZES = (50, 100, 250)
M5_RHOS = (0.1, 0.3, 0.5)
GROWING_SHAPES = [(30, 40), (60, 80), (120, 160)]
MIXING_LOADING = ((1.0, 0.0), (0.5, 1.0))


@dataclass(frozen=True)
class Preset:
    key: str
    title: str
    default_reps: int
    runner: Callable[..., ExperimentReport]

    def run(self, reps: int = None, seed: int = 0, threads: int = 1, progress: bool = False) -> ExperimentReport:
        report = self.runner(self.default_reps if reps is None else reps, seed, threads, progress)
        report.metadata['table'] = self.key
        return report


def _merge(reports: Sequence[ExperimentReport]) -> ExperimentReport:
    first = reports[0]
    merged = ExperimentReport(first.model, first.shape, first.reps, first.master_seed, metadata=dict(first.metadata))
    for report in reports:
        merged.rows.extend(report.rows)
    return merged


def m1_lag_sweep(reps, seed, threads, progress):
    return mc_experiment(m1_default(), M1_SHAPE, diagonal(9), CONSTANT, NO_CUT, reps, seed,
                         threads=threads, progress=progress)


def m1_qs_lag_sweep(reps, seed, threads, progress):
    return mc_experiment(m1_default(), M1_SHAPE, diagonal(9), QS, NO_CUT, reps, seed,
                         threads=threads, progress=progress)


def m1_cut_lag_sweep(reps, seed, threads, progress):
    return mc_experiment(m1_default(), M1_SHAPE, diagonal(4), CONSTANT, CutRule.power_l2(M1_CUT_ALPHA), reps, seed,
                         threads=threads, progress=progress)


def m1_qs_cut_lag_sweep(reps, seed, threads, progress):
    return mc_experiment(m1_default(), M1_SHAPE, diagonal(4) + [(29, 29)], QS, CutRule.power_l2(M1_CUT_ALPHA),
                         reps, seed, threads=threads, progress=progress)


@dataclass
class WeightSweepRow:
    a: float
    kernel: str
    cut: str
    sigma2: float
    rmse_opt: float
    bias: float
    m_opt: str
    rmse_ratio_largest_m: float


def _weight_sweep_worker(task):
    spec, shape, seed, m_set, configs = task
    box = AutocovBox(simulate(spec, shape, seed), tuple(max(ms) for ms in zip(*m_set)))
    return [[float(box.estimate(m, kernel, cut).value) for m in m_set] for kernel, cut in configs]


def m1_weight_sweep(reps, seed, threads, progress):
    """
    M1 with a_5 = 1 and every other weight a, for each kernel with and without the cut: the RMSE minimized over the
    m set, its bias and minimizer, and how much worse the largest m does.
    """
    configs = [(CONSTANT, NO_CUT), (CONSTANT, CutRule.power_l2(M1_CUT_ALPHA)), (QS, NO_CUT),
               (QS, CutRule.power_l2(M1_CUT_ALPHA))]
    master = SeedSpec(seed)
    report = ExperimentReport('M1(a5=1,a)', format_vector(M1_SHAPE), reps, seed,
                              metadata={'largest_m': format_vector(M1_M_SET[29])})
    for a in WEIGHT_SWEEP:
        spec = M1((a,) * 4 + (1.0,) + (a,) * 4)
        target = spec.sigma2()
        tasks = [(spec, M1_SHAPE, master.child(r), M1_M_SET, configs) for r in range(reps)]
        outcomes = run_replications(_weight_sweep_worker, tasks, threads, progress, f"a={a:g}")
        for c, (kernel, cut) in enumerate(configs):
            stats = [summarize([rep[c][i] for rep in outcomes], target) for i in range(len(M1_M_SET))]
            best = min(range(len(M1_M_SET)), key=lambda i: stats[i]['rmse'])
            report.rows.append(WeightSweepRow(a, kernel.name, cut.name, target, stats[best]['rmse'],
                                              stats[best]['bias'], format_vector(M1_M_SET[best]),
                                              stats[29]['rmse'] / stats[best]['rmse']))
    return report


def m4_lag_sweep(reps, seed, threads, progress):
    return _merge([mc_experiment(m4_default(), M4_SHAPE, M4_M_LIST, CONSTANT, cut, reps, seed,
                                 threads=threads, progress=progress)
                   for cut in (NO_CUT, CutRule.power_l2(M4_CUT_ALPHA))])


def m1_subsampling(reps, seed, threads, progress):
    return _merge([subsampling_experiment(m1_default(), M1_SHAPE, SUBSAMPLING_M_LIST, gamma, reps, seed,
                                          m_max=SUBSAMPLING_M_MAX, threads=threads, progress=progress)
                   for gamma in (0.7, 0.8, 0.9)])


def type_one_error_grid(reps, seed, threads, progress):
    """Image test type I error for M2 and the order-40 M5 fields over sizes n x n and cut exponents."""
    models: List[ModelSpec] = [m2_default()] + [M5(rho) for rho in M5_RHOS]
    report = ExperimentReport('M2;M5', ';'.join(f"{n}x{n}" for n in TYPE_ONE_SIZES), reps, seed,
                              metadata={'level': 0.05, 'm': '3x3', 'kernel': 'constant'})
    for spec in models:
        for n in TYPE_ONE_SIZES:
            report.rows.extend(type1_error_sweep(spec, (n, n), reps, TYPE_ONE_ALPHAS, 0.05, seed,
                                                 threads=threads, progress=progress))
    return report


@dataclass
class GrowthRow:
    n: str
    m: str
    mean: float
    rmse: float
    bias: float


def m1_consistency(reps, seed, threads, progress):
    """RMSE of the plain estimator at m = (2, 2) as the M1 field grows."""
    shapes = ';'.join(format_vector(s) for s in GROWING_SHAPES)
    report = ExperimentReport(m1_default().describe(), shapes, reps, seed)
    for shape in GROWING_SHAPES:
        sweep = mc_experiment(m1_default(), shape, [(2, 2)], CONSTANT, NO_CUT, reps, seed, threads=threads,
                              progress=progress)
        row = sweep.rows[0]
        report.rows.append(GrowthRow(format_vector(shape), row.m, row.mean, row.rmse, row.bias))
        report.metadata['sigma2'] = sweep.metadata['sigma2']
    return report


def vector_mix_consistency(reps, seed, threads, progress):
    spec = VectorMix(MIXING_LOADING, (m1_default(), m1_default()))
    return matrix_consistency_experiment(spec, GROWING_SHAPES, (2, 2), reps, seed, threads, progress)


def m1_ring_coverage(reps, seed, threads, progress):
    return coverage_experiment(m1_default(), (60, 80), 1, 0.9, 0.9, reps, seed, threads, progress)


def m1_alpha_tuning(reps, seed, threads, progress):
    grid = alpha_grid_range(10.0, 0.1)
    return _merge([alpha_tuning_experiment(m1_default(), shape, grid, tolerance, reps, seed,
                                           threads=threads, progress=progress)
                   for shape, tolerance in (((30, 40), 0.01), ((45, 60), 0.03))])


PRESETS: Dict[str, Preset] = {p.key: p for p in [
    Preset('1', 'M1 lag sweep, constant kernel', 10000, m1_lag_sweep),
    Preset('2', 'M1 lag sweep, QS kernel with bandwidth m + 6.4', 2000, m1_qs_lag_sweep),
    Preset('3', 'M1 cut-off estimator, constant kernel, alpha 5.8', 2000, m1_cut_lag_sweep),
    Preset('4', 'M1 cut-off estimator, QS kernel, alpha 5.8', 2000, m1_qs_cut_lag_sweep),
    Preset('5', 'M1 weight sweep, optimal RMSE over m', 500, m1_weight_sweep),
    Preset('6', 'M4 lag sweep, constant kernel, without and with alpha 9.4', 1000, m4_lag_sweep),
    Preset('8', 'M1 subsampled mean and RMSE for gamma 0.7, 0.8, 0.9', 500, m1_subsampling),
    Preset('10', 'Image test type I error, M2 and M5', 2000, type_one_error_grid),
    Preset('consistency', 'M1 RMSE at m = 2x2 for growing fields', 500, m1_consistency),
    Preset('matrix', 'Two-channel mixture, max-norm error for growing fields', 500, vector_mix_consistency),
    Preset('coverage', 'Coverage of the 90% interval for the first ring sum, M1', 500, m1_ring_coverage),
    Preset('alpha', 'Tuned cut exponent for M1 at 30x40 and 45x60', 200, m1_alpha_tuning),
]}


def preset(key) -> Preset:
    try:
        return PRESETS[str(key)]
    except KeyError:
        raise ValueError(f"unknown table '{key}', expected one of {'|'.join(PRESETS)}") from None
