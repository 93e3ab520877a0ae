"""
The standardized partial-sum image test and the Monte Carlo harnesses that measure the estimators: accuracy of
the variance estimates, type I error of the image test, the subsampled mean and RMSE, coverage of subsampling
intervals, consistency in the matrix norm and the distribution of the tuned cut exponent.

Replications run through `run_replications`, which maps a picklable worker over per-replication tasks in order,
so results do not depend on the number of worker processes.
"""
import json
import math
import sys
from collections import Counter
from dataclasses import asdict, dataclass, field as dataclass_field
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special
from tqdm import tqdm

from errors import NegativeVarianceEstimateError
from estimators import NO_CUT, AutocovBox, CutKind, CutRule, DEFAULT_DELTA, lrv_estimate_centered, threshold_lrv
from models import ModelSpec, analytic_ring_sum, analytic_sigma2, simulate
from subsampling import (DEFAULT_CONFIDENCE, DEFAULT_GAMMA, STOP_ON_ACCEPT, SubsampleGrid, block_autocov_boxes,
                         make_statistic, select_m, subsample_confidence_interval, tune_alpha_detailed)
from util.field_io import FLOAT_FORMAT
from util.grid import Field, Shape, as_int_vector
from util.kernels import CONSTANT, KernelSpec
from util.logging_utils import get_logger
from util.matrix import max_norm
from util.rng import SeedSpec

LOGGER = get_logger('inference')

DEFAULT_TEST_M = (3, 3)


def format_vector(v: Sequence[int]) -> str:
    return 'x'.join(str(int(x)) for x in v)


def inv_normal_cdf(pr: float) -> float:
    """Phi^-1(pr) via scipy's ndtri (Cephes rational approximations, relative error near 1e-15)."""
    if not 0.0 < pr < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {pr}")
    return float(special.ndtri(pr))


def _reference_values(field: Field, reference) -> np.ndarray:
    if isinstance(reference, Field):
        reference = reference.scalar_values()
    reference = np.asarray(reference, dtype=np.float64)
    try:
        shape = np.broadcast_shapes(reference.shape, field.shape)
    except ValueError:
        shape = None
    if shape != field.shape:
        raise ValueError(f"reference of shape {reference.shape} does not broadcast to the field shape {field.shape}")
    return reference


def partial_sum(field: Field, reference=0.0) -> float:
    """S_n = sum_i (Y_i - m0_i) for a scalar, per-site or full-size reference m0."""
    values = field.scalar_values()
    deviations = values - _reference_values(field, reference)
    return math.fsum(deviations.reshape(-1))


@dataclass
class TestResult:
    statistic: float
    sigma_hat: float
    critical: float
    reject: bool
    level: float
    sigma2_hat: float
    kept_lags: Optional[int] = None


def image_test(field: Field, reference=0.0, level: float = 0.05, m: Sequence[int] = DEFAULT_TEST_M,
               kernel: KernelSpec = CONSTANT, cut: CutRule = NO_CUT, known_sigma2: float = None) -> TestResult:
    """
    Rejects H0 when |n|^-1/2 |S_n| > sigma_hat Phi^-1(1 - level/2). sigma_hat comes from the cut-off estimator
    on the deviations from the reference, unless known_sigma2 is given.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"test level must lie in (0, 1), got {level}")
    deviations = Field.from_array(field.scalar_values() - _reference_values(field, reference))
    statistic = abs(partial_sum(deviations)) / math.sqrt(field.size)
    kept_lags = None
    if known_sigma2 is None:
        estimate = threshold_lrv(deviations, m, kernel, cut)
        sigma2 = float(estimate.value)
        kept_lags = estimate.kept_lags
    else:
        sigma2 = float(known_sigma2)
    return _decide(statistic, sigma2, level, kept_lags)


def _decide(statistic: float, sigma2: float, level: float, kept_lags: Optional[int] = None) -> TestResult:
    if sigma2 < 0:
        raise NegativeVarianceEstimateError(sigma2)
    sigma_hat = math.sqrt(sigma2)
    critical = inv_normal_cdf(1.0 - level / 2.0)
    return TestResult(statistic, sigma_hat, critical, statistic > sigma_hat * critical, level, sigma2, kept_lags)


def run_replications(worker: Callable[[Any], Any], tasks: List[Any], threads: int = 1, progress: bool = False,
                     desc: str = 'replications') -> List[Any]:
    """Maps worker over tasks in order, in a process pool when threads > 1."""
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    disable = not progress or not sys.stderr.isatty()
    if threads == 1 or len(tasks) < 2:
        return [worker(task) for task in tqdm(tasks, desc=desc, disable=disable)]
    with Pool(processes=threads) as pool:
        return list(tqdm(pool.imap(worker, tasks), total=len(tasks), desc=desc, disable=disable))


@dataclass
class ExperimentReport:
    model: str
    shape: str
    reps: int
    master_seed: int
    rows: List[Any] = dataclass_field(default_factory=list)
    metadata: Dict[str, Any] = dataclass_field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows])

    def _metadata_items(self):
        items = {'model': self.model, 'shape': self.shape, 'reps': self.reps, 'seed': self.master_seed}
        items.update(self.metadata)
        return items

    def to_csv(self) -> str:
        body = self.to_frame().to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        return body + ''.join(f"# {k}={v}\n" for k, v in self._metadata_items().items())

    def to_json(self) -> str:
        return json.dumps({'metadata': self._metadata_items(), 'rows': [asdict(row) for row in self.rows]},
                          indent=2, default=str)


@dataclass
class ExperimentRow:
    m: str
    kernel: str
    cut: str
    mean: float
    rmse: float
    bias: float
    variance: float
    negative: int


def summarize(values: Sequence[float], target: float) -> Dict[str, float]:
    """Monte Carlo mean, RMSE, bias and variance with exactly rounded sums, so rmse^2 = variance + bias^2."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    mean = math.fsum(values) / n
    variance = math.fsum((values - mean) ** 2) / n
    rmse = math.sqrt(math.fsum((values - target) ** 2) / n)
    return {'mean': mean, 'rmse': rmse, 'bias': mean - target, 'variance': variance}


def _check_reps(reps: int, minimum: int = 1):
    if reps < minimum:
        raise ValueError(f"reps must be >= {minimum}, got {reps}")


def _box_m(m_list: Sequence[Shape]) -> Shape:
    return tuple(max(ms) for ms in zip(*m_list))


def _estimates_worker(task) -> List[float]:
    spec, shape, seed, m_list, kernel, cut, temporal_centering = task
    field = simulate(spec, shape, seed)
    if temporal_centering:
        return [float(lrv_estimate_centered(field, m, kernel, cut).value) for m in m_list]
    box = AutocovBox(field, _box_m(m_list))
    return [float(box.estimate(m, kernel, cut).value) for m in m_list]


def mc_experiment(spec: ModelSpec, shape: Sequence[int], m_list: Sequence[Sequence[int]],
                  kernel: KernelSpec = CONSTANT, cut: CutRule = NO_CUT, reps: int = 2000, seed: int = 0,
                  temporal_centering: bool = False, threads: int = 1, progress: bool = False) -> ExperimentReport:
    """
    Monte Carlo mean, RMSE, bias and variance of the (cut-off) estimator for every m in m_list, measured against
    the model's analytic asymptotic variance. Replication r uses SeedSpec(seed, r).
    """
    _check_reps(reps, 2)
    if spec.p != 1:
        raise ValueError("mc_experiment needs a univariate model; see matrix_consistency_experiment")
    shape = as_int_vector(shape, 'shape')
    m_list = [as_int_vector(m, 'm') for m in m_list]
    if not m_list:
        raise ValueError("m_list must not be empty")
    target = float(analytic_sigma2(spec))
    master = SeedSpec(seed)
    tasks = [(spec, shape, master.child(r), m_list, kernel, cut, temporal_centering) for r in range(reps)]
    results = np.array(run_replications(_estimates_worker, tasks, threads, progress, 'estimates'))
    report = ExperimentReport(spec.describe(), format_vector(shape), reps, seed,
                              metadata={'sigma2': target, 'temporal_centering': temporal_centering})
    for i, m in enumerate(m_list):
        values = results[:, i]
        negative = int(np.count_nonzero(values < 0))
        if negative:
            LOGGER.info("m=%s: %d of %d estimates are negative", m, negative, reps)
        report.rows.append(ExperimentRow(format_vector(m), kernel.name, cut.name, negative=negative,
                                         **summarize(values, target)))
    return report


def _power_cut(cut_alpha: Optional[float], cut_kind: CutKind = CutKind.POWER_L2,
               delta: float = DEFAULT_DELTA) -> CutRule:
    if cut_alpha is None:
        return NO_CUT
    return CutRule(cut_kind, float(cut_alpha), delta)


def _type1_worker(task):
    """Image tests of one H0 field under every cut rule; the field and its autocovariances are shared."""
    spec, shape, seed, m, kernel, cuts, level, known_sigma2 = task
    field = simulate(spec, shape, seed)
    statistic = abs(partial_sum(field)) / math.sqrt(field.size)
    box = AutocovBox(field, m) if known_sigma2 is None else None
    outcomes = []
    for cut in cuts:
        if box is None:
            sigma2, kept_lags = known_sigma2, None
        else:
            estimate = box.estimate(m, kernel, cut)
            sigma2, kept_lags = float(estimate.value), estimate.kept_lags
        try:
            outcomes.append((_decide(statistic, sigma2, level, kept_lags).reject, False))
        except NegativeVarianceEstimateError:
            outcomes.append((False, True))
    return outcomes


@dataclass
class TypeOneRow:
    model: str
    n: str
    cut: str
    level: float
    rate: float
    rejections: int
    negative: int


def type1_error_sweep(spec: ModelSpec, shape: Sequence[int], reps: int, cut_alphas: Sequence[Optional[float]],
                      level: float = 0.05, seed: int = 0, m: Sequence[int] = DEFAULT_TEST_M,
                      kernel: KernelSpec = CONSTANT, known_sigma2: float = None,
                      cut_kind: CutKind = CutKind.POWER_L2, threads: int = 1,
                      progress: bool = False) -> List[TypeOneRow]:
    """
    Rejection frequencies of the image test with reference 0 on fields simulated under H0, one row per cut
    exponent (None for no cut). All rows see the same fields. Replications whose variance estimate is negative
    count as non-rejections and are reported in `negative`.
    """
    _check_reps(reps)
    if not 0.0 < level < 1.0:
        raise ValueError(f"test level must lie in (0, 1), got {level}")
    shape = as_int_vector(shape, 'shape')
    m = as_int_vector(m, 'm')
    cuts = [_power_cut(a, cut_kind) for a in cut_alphas]
    master = SeedSpec(seed)
    tasks = [(spec, shape, master.child(r), m, kernel, cuts, level, known_sigma2) for r in range(reps)]
    outcomes = run_replications(_type1_worker, tasks, threads, progress, 'image tests')
    rows = []
    for i, cut in enumerate(cuts):
        rejections = sum(1 for per_cut in outcomes if per_cut[i][0])
        negative = sum(1 for per_cut in outcomes if per_cut[i][1])
        if negative:
            LOGGER.info("%s n=%s cut=%s: %d of %d variance estimates were negative", spec.describe(), shape,
                        cut.name, negative, reps)
        rows.append(TypeOneRow(spec.describe(), format_vector(shape), cut.name, level, rejections / reps,
                               rejections, negative))
    return rows


def type1_error_experiment(spec: ModelSpec, shape: Sequence[int], reps: int, cut_alpha: float = None,
                           level: float = 0.05, seed: int = 0, **kwargs) -> float:
    return type1_error_sweep(spec, shape, reps, [cut_alpha], level, seed, **kwargs)[0].rate


@dataclass
class SubsamplingRow:
    m: str
    gamma: float
    mean: float
    rmse: float
    mean_sub: float
    rmse_sub: float


def _subsampling_worker(task):
    spec, shape, seed, m_list, gamma, m_opt, stop_rule, m_max = task
    field = simulate(spec, shape, seed)
    grid = SubsampleGrid.from_gamma(shape, gamma)
    if m_opt is None:
        m_opt = select_m(field, grid, m_max=m_max, stop_rule=stop_rule)
    box_m = _box_m(m_list + [m_opt])
    full = AutocovBox(field, box_m)
    center = full.estimate(m_opt).sigma2[0, 0]
    boxes = block_autocov_boxes(field, grid, _box_m(m_list))
    rows = []
    for m in m_list:
        blocks = np.array([box.estimate(m).sigma2[0, 0] for box in boxes])
        rows.append((full.estimate(m).sigma2[0, 0], math.fsum(blocks) / len(blocks),
                     math.sqrt(math.fsum((blocks - center) ** 2) / len(blocks))))
    return rows, m_opt


def subsampling_experiment(spec: ModelSpec, shape: Sequence[int], m_list: Sequence[Sequence[int]],
                           gamma: float = DEFAULT_GAMMA, reps: int = 2000, seed: int = 0,
                           m_opt: Sequence[int] = None, stop_rule: str = STOP_ON_ACCEPT, m_max: int = None,
                           threads: int = 1, progress: bool = False) -> ExperimentReport:
    """
    Per m: the Monte Carlo mean and true RMSE of sigma^2_n next to the Monte Carlo means of the subsampled mean
    and RMSE. The subsampled RMSE is centred at sigma^2_n,m_opt, where m_opt is selected on every replication
    unless given; m_max caps the ring tests of that selection.
    """
    _check_reps(reps, 2)
    shape = as_int_vector(shape, 'shape')
    m_list = [as_int_vector(m, 'm') for m in m_list]
    if m_opt is not None:
        m_opt = as_int_vector(m_opt, 'm_opt')
    target = float(analytic_sigma2(spec))
    master = SeedSpec(seed)
    tasks = [(spec, shape, master.child(r), m_list, gamma, m_opt, stop_rule, m_max)
             for r in range(reps)]
    outcomes = run_replications(_subsampling_worker, tasks, threads, progress, 'subsampling')
    selected = Counter(format_vector(m) for _, m in outcomes)
    grid = SubsampleGrid.from_gamma(shape, gamma)
    report = ExperimentReport(spec.describe(), format_vector(shape), reps, seed, metadata={
        'sigma2': target, 'b': format_vector(grid.b), 'h': format_vector(grid.h), 'stop_rule': stop_rule,
        'm_max': m_max if m_max is not None else 'default',
        'm_opt': format_vector(m_opt) if m_opt is not None else 'selected',
        'm_opt_mode': selected.most_common(1)[0][0],
        'm_opt_counts': ';'.join(f"{m}:{count}" for m, count in sorted(selected.items()))})
    for i, m in enumerate(m_list):
        per_rep = np.array([rows[i] for rows, _ in outcomes])
        stats = summarize(per_rep[:, 0], target)
        report.rows.append(SubsamplingRow(format_vector(m), gamma, stats['mean'], stats['rmse'],
                                          math.fsum(per_rep[:, 1]) / reps, math.fsum(per_rep[:, 2]) / reps))
    return report


@dataclass
class CoverageRow:
    k: int
    target: float
    confidence: float
    coverage: float
    mean_width: float


def _coverage_worker(task):
    spec, shape, seed, k, gamma, confidence, target = task
    field = simulate(spec, shape, seed)
    grid = SubsampleGrid.from_gamma(shape, gamma)
    interval = subsample_confidence_interval(field, grid, make_statistic('ring', k=k), confidence)
    return interval.contains(target), interval.upper - interval.lower


def coverage_experiment(spec: ModelSpec, shape: Sequence[int], lag_shell: int = 1, gamma: float = DEFAULT_GAMMA,
                        confidence: float = DEFAULT_CONFIDENCE, reps: int = 500, seed: int = 0, threads: int = 1,
                        progress: bool = False) -> ExperimentReport:
    """Fraction of replications whose subsampling interval for r(k 1) covers the analytic ring sum."""
    _check_reps(reps)
    shape = as_int_vector(shape, 'shape')
    target = analytic_ring_sum(spec, lag_shell)
    master = SeedSpec(seed)
    tasks = [(spec, shape, master.child(r), lag_shell, gamma, confidence, target) for r in range(reps)]
    outcomes = run_replications(_coverage_worker, tasks, threads, progress, 'coverage')
    covered = sum(1 for hit, _ in outcomes if hit)
    width = math.fsum(w for _, w in outcomes) / reps
    report = ExperimentReport(spec.describe(), format_vector(shape), reps, seed, metadata={'gamma': gamma})
    report.rows.append(CoverageRow(lag_shell, target, confidence, covered / reps, width))
    return report


@dataclass
class ConsistencyRow:
    n: str
    m: str
    mean_max_error: float
    mean_frobenius_error: float


def _matrix_worker(task):
    spec, shape, seed, m, target = task
    estimate = threshold_lrv(simulate(spec, shape, seed), m).sigma2
    return max_norm(estimate - target), float(np.linalg.norm(estimate - target, 'fro'))


def matrix_consistency_experiment(spec: ModelSpec, shapes: Sequence[Sequence[int]], m: Sequence[int],
                                  reps: int = 500, seed: int = 0, threads: int = 1,
                                  progress: bool = False) -> ExperimentReport:
    """Mean ||sigma^2_n - sigma^2||_max per shape, for multivariate models with a matrix-valued target."""
    _check_reps(reps)
    m = as_int_vector(m, 'm')
    target = np.atleast_2d(analytic_sigma2(spec))
    master = SeedSpec(seed)
    report = ExperimentReport(spec.describe(), ';'.join(format_vector(s) for s in shapes), reps, seed,
                              metadata={'sigma2': json.dumps(target.tolist())})
    for shape in shapes:
        shape = as_int_vector(shape, 'shape')
        tasks = [(spec, shape, master.child(r), m, target) for r in range(reps)]
        errors = run_replications(_matrix_worker, tasks, threads, progress, f"n={format_vector(shape)}")
        report.rows.append(ConsistencyRow(format_vector(shape), format_vector(m),
                                          math.fsum(e for e, _ in errors) / reps,
                                          math.fsum(f for _, f in errors) / reps))
    return report


@dataclass
class AlphaTuningRow:
    n: str
    tolerance: float
    alpha_median: float
    alpha_mean: float
    alpha_std: float
    m_opt_mode: str


def _alpha_worker(task):
    spec, shape, seed, alpha_grid, tolerance, gamma, m_opt, block_m_list = task
    field = simulate(spec, shape, seed)
    grid = SubsampleGrid.from_gamma(shape, gamma)
    tuning = tune_alpha_detailed(field, grid, alpha_grid, tolerance, m_opt=m_opt, block_m_list=block_m_list)
    return tuning.alpha, tuning.m_opt


def alpha_tuning_experiment(spec: ModelSpec, shape: Sequence[int], alpha_grid: Sequence[float],
                            tolerance: float = 0.01, reps: int = 200, seed: int = 0, gamma: float = DEFAULT_GAMMA,
                            m_opt: Sequence[int] = None, block_m_list: Sequence[Sequence[int]] = None,
                            threads: int = 1, progress: bool = False) -> ExperimentReport:
    """Distribution of the tuned alpha over replications."""
    _check_reps(reps)
    shape = as_int_vector(shape, 'shape')
    alpha_grid = [float(a) for a in alpha_grid]
    master = SeedSpec(seed)
    tasks = [(spec, shape, master.child(r), alpha_grid, tolerance, gamma, m_opt, block_m_list)
             for r in range(reps)]
    outcomes = run_replications(_alpha_worker, tasks, threads, progress, 'alpha tuning')
    alphas = np.array([a for a, _ in outcomes])
    mode = Counter(format_vector(m) for _, m in outcomes).most_common(1)[0][0]
    report = ExperimentReport(spec.describe(), format_vector(shape), reps, seed,
                              metadata={'gamma': gamma, 'alpha_max': alpha_grid[-1]})
    report.rows.append(AlphaTuningRow(format_vector(shape), tolerance, float(np.median(alphas)),
                                      math.fsum(alphas) / reps, float(np.std(alphas)), mode))
    return report
