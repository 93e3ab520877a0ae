"""
Sample autocovariances of a random field and the lag-truncation estimators of its asymptotic variance:
the kernel-weighted sum over the lag box |j| <= m, its hard-threshold (cut-off) variant, and the variant that
centres every site at its temporal average for multiplicative space-time models.
"""
import functools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np
from scipy import signal

from errors import ZeroOverlapError
from util.grid import Field, Lag, Shape, as_int_vector, lag_box, overlap_count
from util.kernels import CONSTANT, KernelSpec, weight_grid
from util.logging_utils import get_logger
from util.matrix import scalar_or_matrix

LOGGER = get_logger('estimators')

DEFAULT_DELTA = 1e-4
# Sums over more terms than this are accumulated with math.fsum.
COMPENSATED_SUM_THRESHOLD = 10 ** 6

# Distinct (m, shape) pairs remembered for the large-m warning.
RATE_WARNING_MEMORY = 64


class CutKind(Enum):
    POWER_L2 = 'power_l2'
    POWER_MAX = 'power_max'
    CONSTANT = 'constant'
    NONE = 'none'


@dataclass(frozen=True)
class CutRule:
    """
    Lag-dependent threshold c_n(j). An autocovariance entry is kept when its absolute value exceeds c_n(j).

    power_l2:  ||j||_2^alpha / (n_1 ... n_q) - delta
    power_max: (max_i |j_i|)^alpha / (n_1 ... n_q) - delta
    constant:  constant_c
    none:      -inf, nothing is ever cut
    """
    kind: CutKind = CutKind.NONE
    alpha: float = 0.0
    delta: float = DEFAULT_DELTA
    constant_c: float = 0.0

    def __post_init__(self):
        if not isinstance(self.kind, CutKind):
            object.__setattr__(self, 'kind', CutKind(self.kind))
        if not self.alpha >= 0:
            raise ValueError(f"cut exponent alpha must be >= 0, got {self.alpha}")
        if not self.delta > 0:
            raise ValueError(f"cut offset delta must be > 0, got {self.delta}")

    @classmethod
    def power_l2(cls, alpha: float, delta: float = DEFAULT_DELTA) -> 'CutRule':
        return cls(CutKind.POWER_L2, float(alpha), float(delta))

    @classmethod
    def power_max(cls, alpha: float, delta: float = DEFAULT_DELTA) -> 'CutRule':
        return cls(CutKind.POWER_MAX, float(alpha), float(delta))

    @classmethod
    def constant(cls, c: float) -> 'CutRule':
        return cls(CutKind.CONSTANT, constant_c=float(c))

    @classmethod
    def from_name(cls, name: str, alpha: float = 0.0, delta: float = DEFAULT_DELTA,
                  constant_c: float = 0.0) -> 'CutRule':
        try:
            kind = CutKind(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown cut rule '{name}', expected power_l2|power_max|constant|none") from None
        return cls(kind, float(alpha), float(delta), float(constant_c))

    @property
    def name(self) -> str:
        if self.kind is CutKind.NONE:
            return 'none'
        if self.kind is CutKind.CONSTANT:
            return f"constant({self.constant_c:g})"
        return f"{self.kind.value}({self.alpha:g})"


NO_CUT = CutRule()


@dataclass
class VarianceEstimate:
    sigma2: np.ndarray
    m_used: Shape
    kernel: KernelSpec
    cut: CutRule
    kept_lags: int

    @property
    def value(self):
        """The estimate as a float for univariate fields, otherwise the p x p matrix."""
        return scalar_or_matrix(self.sigma2)


def _overlap_slices(shape: Sequence[int], lag: Sequence[int]) -> Tuple[tuple, tuple]:
    """Index slices selecting i and i + j over the overlap set of the lag."""
    base, shifted = [], []
    for n, j in zip(shape, lag):
        if j >= 0:
            base.append(slice(0, n - j))
            shifted.append(slice(j, n))
        else:
            base.append(slice(-j, n))
            shifted.append(slice(0, n + j))
    return tuple(base), tuple(shifted)


def _cross_products(a: np.ndarray, b: np.ndarray, count: int) -> np.ndarray:
    """sum_i a_i b_i' / count for row-stacked observations a, b of shape (count, p)."""
    if count > COMPENSATED_SUM_THRESHOLD:
        p = a.shape[1]
        return np.array([[math.fsum(a[:, u] * b[:, v]) for v in range(p)] for u in range(p)]) / count
    return a.T @ b / count


def sample_autocov(field: Field, lag) -> np.ndarray:
    """
    gamma_n(j) = |G(j)|^-1 sum_{i in G(j)} xi_i xi_{i+j}', where G(j) holds the sites i with i + j on the grid.
    No mean is subtracted; the field is taken to be centred.
    """
    lag = lag if isinstance(lag, Lag) else Lag(lag)
    count = overlap_count(field.shape, lag)
    if count == 0:
        raise ZeroOverlapError(field.shape, lag)
    base, shifted = _overlap_slices(field.shape, lag)
    a = field.values[base].reshape(-1, field.p)
    b = field.values[shifted].reshape(-1, field.p)
    return _cross_products(a, b, count)


def _check_m(field: Field, m) -> Shape:
    m = as_int_vector(m, 'm')
    if len(m) != field.q:
        raise ValueError(f"m={m} has {len(m)} components but the field is {field.q}-dimensional")
    if any(mi < 0 for mi in m):
        raise ValueError(f"m must be componentwise >= 0, got {m}")
    if any(mi >= n for mi, n in zip(m, field.shape)):
        raise ValueError(f"m={m} must be componentwise smaller than the field shape {field.shape}")
    return m


@functools.lru_cache(maxsize=RATE_WARNING_MEMORY)
def _warn_rate_once(m: Shape, shape: Shape):
    m_star, n_star = max(m), min(shape)
    LOGGER.warning("lag truncation m=%s is large for shape %s: (m*)^3 = %d >= n* = %d",
                   m, shape, m_star ** 3, n_star)


def _warn_rate(m: Shape, shape: Shape):
    if max(m) ** 3 >= min(shape):
        _warn_rate_once(tuple(m), tuple(shape))


def cut_threshold(rule: CutRule, lag, shape: Sequence[int]) -> float:
    """The threshold c_n(j) of the rule at one lag."""
    if rule.kind is CutKind.NONE:
        return -math.inf
    if rule.kind is CutKind.CONSTANT:
        return rule.constant_c
    lag = lag if isinstance(lag, Lag) else Lag(lag)
    size = math.prod(shape)
    length = lag.norm() if rule.kind is CutKind.POWER_L2 else float(lag.star)
    return length ** rule.alpha / size - rule.delta


def threshold_grid(rule: CutRule, m: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    """c_n(j) over the whole box |j| <= m, shaped like the box."""
    box_shape = tuple(2 * mi + 1 for mi in m)
    if rule.kind is CutKind.NONE:
        return np.full(box_shape, -np.inf)
    if rule.kind is CutKind.CONSTANT:
        return np.full(box_shape, rule.constant_c)
    axes = np.ix_(*(np.arange(-mi, mi + 1) for mi in m))
    if rule.kind is CutKind.POWER_L2:
        length = np.sqrt(sum(a.astype(np.float64) ** 2 for a in axes))
    else:
        length = np.zeros(box_shape)
        for a in axes:
            length = np.maximum(length, np.abs(a))
    return np.power(length, rule.alpha) / math.prod(shape) - rule.delta


class AutocovBox:
    """
    Every sample autocovariance gamma_n(j), |j| <= m, of one field, stored in an array of shape
    (2m_1+1, ..., 2m_q+1, p, p). Estimates for any m' <= m can then be read off without touching the field again.
    """

    def __init__(self, field: Field, m: Sequence[int]):
        self.m = _check_m(field, m)
        self.shape = field.shape
        self.p = field.p
        self.gammas = self._compute(field)

    def _compute(self, field: Field) -> np.ndarray:
        box_shape = tuple(2 * mi + 1 for mi in self.m)
        gammas = np.empty(box_shape + (self.p, self.p))
        if field.size > COMPENSATED_SUM_THRESHOLD:
            for lag in lag_box(self.m):
                gammas[tuple(j + mi for j, mi in zip(lag, self.m))] = sample_autocov(field, lag)
            return gammas
        counts = np.ones(())
        for n, mi in zip(self.shape, self.m):
            counts = np.multiply.outer(counts, n - np.abs(np.arange(-mi, mi + 1)))
        centre = tuple(slice(n - 1 - mi, n + mi) for n, mi in zip(self.shape, self.m))
        x = field.values
        for u in range(self.p):
            for v in range(self.p):
                # correlate(y, x)[j + n - 1] = sum_i x_i y_{i+j}
                full = signal.correlate(x[..., v], x[..., u], mode='full')
                gammas[..., u, v] = full[centre] / counts
        return gammas

    def gamma(self, lag) -> np.ndarray:
        lag = lag if isinstance(lag, Lag) else Lag(lag)
        if not lag.within(self.m):
            raise ValueError(f"lag {lag.j} is outside the computed box |j| <= {self.m}")
        return self.gammas[tuple(j + mi for j, mi in zip(lag, self.m))]

    def sub_box(self, m: Sequence[int]) -> np.ndarray:
        if len(m) != len(self.m) or any(a < 0 or a > b for a, b in zip(m, self.m)):
            raise ValueError(f"m={tuple(m)} is not inside the computed box {self.m}")
        return self.gammas[tuple(slice(M - a, M + a + 1) for a, M in zip(m, self.m))]

    def estimate(self, m: Sequence[int], kernel: KernelSpec = CONSTANT, rule: CutRule = NO_CUT) -> VarianceEstimate:
        """sum_{|j| <= m} w_m(j) (gamma_n(j) o 1{|gamma_n(j)| > c_n(j)})."""
        m = tuple(int(mi) for mi in m)
        terms = self.sub_box(m)
        keep = np.abs(terms) > threshold_grid(rule, m, self.shape)[..., np.newaxis, np.newaxis]
        kept_lags = int(np.count_nonzero(keep.reshape(keep.shape[:len(m)] + (-1,)).any(axis=-1)))
        weights = weight_grid(kernel, m)
        sigma2 = np.tensordot(weights, terms * keep, axes=len(m))
        return VarianceEstimate(sigma2, m, kernel, rule, kept_lags)


def autocov_box(field: Field, m: Sequence[int]) -> AutocovBox:
    return AutocovBox(field, m)


def center_global_mean(field: Field) -> Field:
    """Subtracts each channel's grand mean; for practical data that is not centred already."""
    axes = tuple(range(field.q))
    return Field(field.values - field.values.mean(axis=axes))


def lrv_estimate(field: Field, m: Sequence[int], kernel: KernelSpec = CONSTANT,
                 center: bool = False) -> VarianceEstimate:
    """sigma^2_n = sum_{|j| <= m} w_m(j) gamma_n(j)."""
    return threshold_lrv(field, m, kernel, NO_CUT, center=center)


def threshold_lrv(field: Field, m: Sequence[int], kernel: KernelSpec = CONSTANT, rule: CutRule = NO_CUT,
                  center: bool = False) -> VarianceEstimate:
    """
    The cut-off estimator: every entry of gamma_n(j) is kept only if its absolute value exceeds c_n(j), one
    threshold per lag for all p^2 entries. With rule none this is exactly lrv_estimate.
    """
    if center:
        field = center_global_mean(field)
    m = _check_m(field, m)
    _warn_rate(m, field.shape)
    return AutocovBox(field, m).estimate(m, kernel, rule)


def lrv_estimate_centered(field: Field, m: Sequence[int], kernel: KernelSpec = CONSTANT,
                          rule: CutRule = NO_CUT) -> VarianceEstimate:
    """
    Variance estimate for multiplicative space-time fields (axis 0 is time). Both factors of every product are
    centred at the temporal mean of the base site: (xi_i - xibar_s)(xi_{i+j} - xibar_s)' with s the spatial part
    of i.
    """
    if field.q < 2:
        raise ValueError(f"temporal centring needs a time axis and at least one spatial axis, got q={field.q}")
    if field.shape[0] < 2:
        raise ValueError(f"temporal centring needs n_1 >= 2, got n_1={field.shape[0]}")
    m = _check_m(field, m)
    _warn_rate(m, field.shape)
    x = field.values
    means = x.mean(axis=0)
    box_shape = tuple(2 * mi + 1 for mi in m)
    gammas = np.empty(box_shape + (field.p, field.p))
    for lag in lag_box(m):
        count = overlap_count(field.shape, lag)
        base, shifted = _overlap_slices(field.shape, lag)
        site_means = means[base[1:]]
        a = (x[base] - site_means).reshape(-1, field.p)
        b = (x[shifted] - site_means).reshape(-1, field.p)
        gammas[tuple(j + mi for j, mi in zip(lag, m))] = _cross_products(a, b, count)
    keep = np.abs(gammas) > threshold_grid(rule, m, field.shape)[..., np.newaxis, np.newaxis]
    kept_lags = int(np.count_nonzero(keep.reshape(box_shape + (-1,)).any(axis=-1)))
    sigma2 = np.tensordot(weight_grid(kernel, m), gammas * keep, axes=len(m))
    return VarianceEstimate(sigma2, m, kernel, rule, kept_lags)
