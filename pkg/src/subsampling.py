"""
Block subsampling of random fields: statistics are recomputed on every size-b sub-grid placed on a stride-h
lattice, and the spread of those values approximates the sampling law of the full-field statistic. On top of the
engine sit the data-adaptive procedures: sequential selection of the lag truncation m through ring tests, the
subsampled RMSE and mean of the variance estimator, and tuning of the cut exponent alpha.
"""
import itertools
import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from errors import BlockStatisticError
from estimators import NO_CUT, AutocovBox, CutKind, CutRule, DEFAULT_DELTA, lrv_estimate
from util.grid import Field, Shape, as_int_vector
from util.kernels import CONSTANT, KernelSpec
from util.logging_utils import get_logger
from util.matrix import scalar_or_matrix
from util.sequence import Sequence as StepSequence, Step, StepResult

LOGGER = get_logger('subsampling')

DEFAULT_GAMMA = 0.9
DEFAULT_CONFIDENCE = 0.90
# Guards floor/ceil against products like 0.9 * 100 = 90.00000000000001.
ROUNDING_GUARD = 1e-9

STOP_ON_REJECT = 'reject'
STOP_ON_ACCEPT = 'accept'
STOP_RULES = (STOP_ON_REJECT, STOP_ON_ACCEPT)

Statistic = Callable[[Field], float]


@dataclass(frozen=True)
class SubsampleGrid:
    """Block shape b and stride h. Along axis k there are N_k = floor((n_k - b_k) / h_k) + 1 blocks."""
    b: Shape
    h: Shape = None

    def __post_init__(self):
        b = as_int_vector(self.b, 'b')
        h = tuple(1 for _ in b) if self.h is None else as_int_vector(self.h, 'h')
        if len(h) != len(b):
            raise ValueError(f"block shape {b} and stride {h} differ in dimension")
        if any(x < 1 for x in b):
            raise ValueError(f"block shape must be >= 1 on every axis, got {b}")
        if any(x < 1 for x in h):
            raise ValueError(f"stride must be >= 1 on every axis, got {h}")
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'h', h)

    @classmethod
    def from_gamma(cls, shape: Sequence[int], gamma: float = DEFAULT_GAMMA, stride=None) -> 'SubsampleGrid':
        """b_k = floor(n_k^gamma)."""
        if not 0 < gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        shape = as_int_vector(shape, 'shape')
        return cls(tuple(max(1, math.floor(n ** gamma + ROUNDING_GUARD)) for n in shape), stride)

    def validate(self, shape: Sequence[int]):
        if len(shape) != len(self.b):
            raise ValueError(f"block shape {self.b} does not match the {len(shape)}-dimensional field")
        if any(b > n for b, n in zip(self.b, shape)):
            raise ValueError(f"block shape {self.b} exceeds the field shape {tuple(shape)}")

    def counts(self, shape: Sequence[int]) -> Shape:
        self.validate(shape)
        return tuple((n - b) // h + 1 for n, b, h in zip(shape, self.b, self.h))

    def num_blocks(self, shape: Sequence[int]) -> int:
        return math.prod(self.counts(shape))

    @property
    def tau_b(self) -> float:
        return math.sqrt(math.prod(self.b))


def enumerate_blocks(shape: Sequence[int], grid: SubsampleGrid) -> List[Shape]:
    """Origins (0-based) of every block, lexicographic with the last axis fastest."""
    counts = grid.counts(shape)
    return list(itertools.product(*(range(0, c * h, h) for c, h in zip(counts, grid.h))))


def subsample_values(field: Field, grid: SubsampleGrid, statistic: Statistic) -> np.ndarray:
    """The statistic evaluated on every block, in block order."""
    values = []
    for index, origin in enumerate(enumerate_blocks(field.shape, grid)):
        try:
            values.append(float(statistic(field.block(origin, grid.b))))
        except Exception as e:
            raise BlockStatisticError(index, origin, e) from e
    return np.array(values)


@dataclass
class SamplingDistribution:
    """The empirical law L(x) of tau_b (theta_b,i - center); values are kept sorted."""
    values: np.ndarray
    center: float
    tau_b: float

    @property
    def size(self) -> int:
        return len(self.values)

    def cdf(self, x: float) -> float:
        return np.searchsorted(self.values, x, side='right') / self.size

    def quantile(self, gamma: float) -> float:
        return subsample_quantile(self, gamma)


def empirical_distribution(values, center: float, tau_b: float) -> SamplingDistribution:
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ValueError("empirical distribution needs at least one subsample value")
    if not tau_b > 0:
        raise ValueError(f"tau_b must be positive, got {tau_b}")
    return SamplingDistribution(np.sort(tau_b * (values - center)), float(center), float(tau_b))


def subsample_quantile(dist: SamplingDistribution, gamma: float) -> float:
    """inf{x : L(x) >= gamma}, which is the ceil(gamma N)-th order statistic."""
    if not 0 < gamma < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {gamma}")
    k = max(1, math.ceil(gamma * dist.size - ROUNDING_GUARD))
    return float(dist.values[k - 1])


@dataclass
class ConfidenceInterval:
    lower: float
    upper: float
    estimate: float
    confidence: float

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


def _interval(estimate: float, block_values: np.ndarray, grid: SubsampleGrid, shape: Shape,
              confidence: float) -> ConfidenceInterval:
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    dist = empirical_distribution(block_values, estimate, grid.tau_b)
    tau_n = math.sqrt(math.prod(shape))
    return ConfidenceInterval(estimate - dist.quantile((1 + confidence) / 2) / tau_n,
                              estimate - dist.quantile((1 - confidence) / 2) / tau_n,
                              estimate, confidence)


def subsample_confidence_interval(field: Field, grid: SubsampleGrid, statistic: Statistic,
                                  confidence: float = DEFAULT_CONFIDENCE) -> ConfidenceInterval:
    """Equal-tailed interval [theta_n - q((1+c)/2) / tau_n, theta_n - q((1-c)/2) / tau_n]."""
    values = subsample_values(field, grid, statistic)
    return _interval(float(statistic(field)), values, grid, field.shape, confidence)


def block_autocov_boxes(field: Field, grid: SubsampleGrid, m: Sequence[int]) -> List[AutocovBox]:
    """One autocovariance box per block, so several estimates per block cost a single pass."""
    boxes = []
    for index, origin in enumerate(enumerate_blocks(field.shape, grid)):
        try:
            boxes.append(AutocovBox(field.block(origin, grid.b), m))
        except Exception as e:
            raise BlockStatisticError(index, origin, e) from e
    return boxes


def _check_block_m(m: Sequence[int], grid: SubsampleGrid, name: str = 'm') -> Shape:
    m = as_int_vector(m, name)
    if len(m) != len(grid.b) or any(mi < 0 or mi >= b for mi, b in zip(m, grid.b)):
        raise ValueError(f"{name}={m} must be componentwise >= 0 and smaller than the block shape {grid.b}")
    return m


def _rmse(estimates: Sequence[np.ndarray], center: np.ndarray) -> float:
    return math.sqrt(math.fsum(float(np.sum((e - center) ** 2)) for e in estimates) / len(estimates))


def subsample_rmse(field: Field, grid: SubsampleGrid, m_opt: Sequence[int], cut: CutRule = NO_CUT,
                   m: Sequence[int] = None) -> float:
    """
    sqrt(N^-1 sum_i (sigma^2_b,i - sigma^2_n,m_opt)^2). Block estimates use constant weights, lag truncation m
    (m_opt when not given) and the cut rule evaluated at the block shape; the centre is the plain
    constant-weight estimate of the whole field at m_opt.
    """
    grid.validate(field.shape)
    m_opt = as_int_vector(m_opt, 'm_opt')
    m = _check_block_m(m_opt if m is None else m, grid)
    center = lrv_estimate(field, m_opt).sigma2
    estimates = [box.estimate(m, CONSTANT, cut).sigma2 for box in block_autocov_boxes(field, grid, m)]
    return _rmse(estimates, center)


def subsample_mean(field: Field, grid: SubsampleGrid, m: Sequence[int], cut: CutRule = NO_CUT):
    """Average of the block estimates sigma^2_b,i."""
    grid.validate(field.shape)
    m = _check_block_m(m, grid)
    estimates = [box.estimate(m, CONSTANT, cut).sigma2 for box in block_autocov_boxes(field, grid, m)]
    return scalar_or_matrix(np.mean(estimates, axis=0))


def _ring_sum(box: AutocovBox, k: int) -> float:
    """Sum of gamma(j) over the max-norm shell ||j||_max = k."""
    inner = box.sub_box((k,) * len(box.m))[..., 0, 0]
    if k == 0:
        return float(inner.sum())
    return float(inner.sum() - box.sub_box((k - 1,) * len(box.m))[..., 0, 0].sum())


def _check_univariate(field: Field, what: str):
    if field.p != 1:
        raise ValueError(f"{what} is defined for univariate fields, got p={field.p}")


def ring_statistic(field: Field, k: int) -> float:
    """R(k) = sum of the sample autocovariances over the ring of lags with max_i |j_i| = k."""
    _check_univariate(field, 'the ring statistic')
    if k < 0 or k >= min(field.shape):
        raise ValueError(f"ring index k={k} must satisfy 0 <= k < {min(field.shape)}")
    return _ring_sum(AutocovBox(field, (k,) * field.q), k)


def default_m_max(grid: SubsampleGrid) -> int:
    return max(1, min(grid.b) // 3)


@dataclass
class MSelection:
    m_opt: Shape
    stopped_at: Optional[int]
    exhausted: bool
    intervals: List[ConfidenceInterval]
    stop_rule: str


class RingTest(Step):
    """Tests H0: r(k 1) = 0 with the subsampling interval for the ring sum."""

    def __init__(self, k: int, full_box: AutocovBox, block_boxes: List[AutocovBox], grid: SubsampleGrid,
                 confidence: float, stop_rule: str):
        self.k = k
        self.full_box = full_box
        self.block_boxes = block_boxes
        self.grid = grid
        self.confidence = confidence
        self.stop_rule = stop_rule

    def tick(self) -> StepResult:
        values = np.array([_ring_sum(box, self.k) for box in self.block_boxes])
        interval = _interval(_ring_sum(self.full_box, self.k), values, self.grid, self.full_box.shape,
                             self.confidence)
        rejected = not interval.contains(0.0)
        LOGGER.debug("ring k=%d: R=%.6g interval=[%.6g, %.6g] %s", self.k, interval.estimate, interval.lower,
                      interval.upper, 'rejects' if rejected else 'accepts')
        done = rejected if self.stop_rule == STOP_ON_REJECT else not rejected
        return StepResult(interval, done)


def select_m_detailed(field: Field, grid: SubsampleGrid, confidence: float = DEFAULT_CONFIDENCE,
                      m_max: int = None, stop_rule: str = STOP_ON_REJECT) -> MSelection:
    """
    Sequential ring tests for k = 1, 2, ..., m_max. With stop_rule 'reject' the procedure stops at the first k'
    whose interval excludes 0; with 'accept' at the first k' whose interval contains 0. Either way the result is
    (k' - 1) 1, or m_max 1 when no test stops it.
    """
    _check_univariate(field, 'selection of m')
    if stop_rule not in STOP_RULES:
        raise ValueError(f"stop_rule must be one of {'|'.join(STOP_RULES)}, got '{stop_rule}'")
    grid.validate(field.shape)
    m_max = default_m_max(grid) if m_max is None else int(m_max)
    if m_max < 1 or m_max >= min(grid.b):
        raise ValueError(f"m_max={m_max} must satisfy 1 <= m_max < min(b) = {min(grid.b)}")
    box_m = (m_max,) * field.q
    full_box = AutocovBox(field, box_m)
    block_boxes = block_autocov_boxes(field, grid, box_m)
    steps = [RingTest(k, full_box, block_boxes, grid, confidence, stop_rule) for k in range(1, m_max + 1)]
    sequence = StepSequence(steps)
    stopped = sequence.run()
    if stopped is None:
        m_opt = box_m
        LOGGER.debug("no ring test stopped the selection; m_opt=%s", m_opt)
        return MSelection(m_opt, None, True, sequence.outcomes, stop_rule)
    k_stop = steps[stopped].k
    m_opt = (k_stop - 1,) * field.q
    LOGGER.debug("selection stopped at k'=%d (%s); m_opt=%s", k_stop, stop_rule, m_opt)
    return MSelection(m_opt, k_stop, False, sequence.outcomes, stop_rule)


def select_m(field: Field, grid: SubsampleGrid, confidence: float = DEFAULT_CONFIDENCE, m_max: int = None,
             stop_rule: str = STOP_ON_REJECT) -> Shape:
    return select_m_detailed(field, grid, confidence, m_max, stop_rule).m_opt


@dataclass
class AlphaTuning:
    alpha: float
    m_opt: Shape
    rmse_by_alpha: Dict[float, float] = dataclass_field(default_factory=dict)
    selection: Optional[MSelection] = None


def _check_alpha_grid(alpha_grid: Sequence[float]) -> List[float]:
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("alpha grid must not be empty")
    if grid[0] != 0.0:
        raise ValueError(f"alpha grid must start at 0, got {grid[0]}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("alpha grid must be strictly increasing")
    return grid


def alpha_grid_range(alpha_max: float, alpha_step: float) -> List[float]:
    """0, step, 2 step, ..., up to alpha_max; values are rounded so repeated addition leaves no drift."""
    if not alpha_step > 0 or not alpha_max >= 0:
        raise ValueError(f"need alpha_step > 0 and alpha_max >= 0, got {alpha_step} and {alpha_max}")
    count = math.floor(alpha_max / alpha_step + ROUNDING_GUARD)
    return [round(i * alpha_step, 12) for i in range(count + 1)]


def tune_alpha_detailed(field: Field, grid: SubsampleGrid, alpha_grid: Sequence[float], tolerance: float = 0.01,
                        m_opt: Sequence[int] = None, m_max: int = None, stop_rule: str = STOP_ON_ACCEPT,
                        cut_kind: CutKind = CutKind.POWER_L2, delta: float = DEFAULT_DELTA,
                        block_m_list: Sequence[Sequence[int]] = None,
                        confidence: float = DEFAULT_CONFIDENCE) -> AlphaTuning:
    """
    Subsampled RMSE of the cut-off estimator for every alpha of the grid, centred at sigma^2_n,m_opt. The chosen
    alpha is the largest one whose RMSE stays within (1 + tolerance) of the RMSE at alpha = 0. Block estimates
    use m_opt, or, with block_m_list, the smallest RMSE over those truncations.
    """
    alphas = _check_alpha_grid(alpha_grid)
    if not tolerance >= 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")
    if cut_kind not in (CutKind.POWER_L2, CutKind.POWER_MAX):
        raise ValueError(f"alpha tuning needs a power cut rule, got {cut_kind.value}")
    grid.validate(field.shape)
    selection = None
    if m_opt is None:
        selection = select_m_detailed(field, grid, confidence, m_max, stop_rule)
        m_opt = selection.m_opt
    m_opt = as_int_vector(m_opt, 'm_opt')
    block_ms = [m_opt] if block_m_list is None else [as_int_vector(m, 'block m') for m in block_m_list]
    if not block_ms:
        raise ValueError("block_m_list must not be empty")
    for m in block_ms:
        _check_block_m(m, grid, 'block m')
    box_m = tuple(max(ms) for ms in zip(*block_ms))
    center = lrv_estimate(field, m_opt).sigma2
    boxes = block_autocov_boxes(field, grid, box_m)

    rmse_by_alpha = {}
    for alpha in alphas:
        rule = CutRule(cut_kind, alpha, delta)
        rmse_by_alpha[alpha] = min(_rmse([box.estimate(m, CONSTANT, rule).sigma2 for box in boxes], center)
                                   for m in block_ms)
    limit = (1.0 + tolerance) * rmse_by_alpha[0.0]
    chosen = max(a for a in alphas if rmse_by_alpha[a] <= limit)
    LOGGER.debug("tuned alpha=%g with m_opt=%s (limit %.6g)", chosen, m_opt, limit)
    return AlphaTuning(chosen, m_opt, rmse_by_alpha, selection)


def tune_alpha(field: Field, grid: SubsampleGrid, alpha_grid: Sequence[float], tolerance: float = 0.01,
               **kwargs) -> float:
    return tune_alpha_detailed(field, grid, alpha_grid, tolerance, **kwargs).alpha


STATISTIC_NAMES = ('lrv', 'mean', 'ring')


def make_statistic(name: str, m: Sequence[int] = None, k: int = 1, kernel: KernelSpec = CONSTANT,
                   cut: CutRule = NO_CUT) -> Statistic:
    """Block statistics offered on the command line: the variance estimate at m, the grand mean, or R(k)."""
    name = name.strip().lower()
    if name == 'lrv':
        if m is None:
            raise ValueError("the lrv statistic needs m")
        m = as_int_vector(m, 'm')

        def lrv(block: Field) -> float:
            _check_univariate(block, 'the lrv statistic')
            return float(AutocovBox(block, m).estimate(m, kernel, cut).value)
        return lrv
    if name == 'mean':
        def mean(block: Field) -> float:
            _check_univariate(block, 'the mean statistic')
            return float(block.values.mean())
        return mean
    if name == 'ring':
        return lambda block: ring_statistic(block, k)
    raise ValueError(f"unknown statistic '{name}', expected one of {'|'.join(STATISTIC_NAMES)}")
