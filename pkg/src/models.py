"""
Simulation models for stationary random fields together with their exact autocovariances and asymptotic
variances. Every model draws i.i.d. standard normal innovations from a seeded generator, so a (model, shape,
seed) triple always produces the same field.
"""
import math
from dataclasses import dataclass, field as dataclass_field
from typing import Mapping, Sequence, Tuple

import numpy as np
from scipy import signal

from util.grid import Field, Lag, as_int_vector, ring_lags
from util.rng import SeedSpec

M1_DEFAULT_WEIGHTS = (0.3, 0.3, 0.3, 0.3, 1.0, 0.3, 0.3, 0.3, 0.3)
M5_DEFAULT_ORDER = 40


class ModelSpec:
    """Base class of all models. Subclasses are frozen dataclasses."""

    @property
    def q(self) -> int:
        raise NotImplementedError

    @property
    def p(self) -> int:
        return 1

    def simulate(self, shape: Tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
        """Draws values of shape shape + (p,)."""
        raise NotImplementedError

    def sigma2(self):
        """The asymptotic variance: sum over all lags of the autocovariances."""
        raise NotImplementedError

    def autocov(self, lag: Lag) -> float:
        raise ValueError(f"{self.describe()} has no scalar analytic autocovariance")

    def describe(self) -> str:
        return type(self).__name__


def _check_rho(rho: float, name: str = 'rho'):
    if not -1.0 < rho < 1.0:
        raise ValueError(f"{name} must lie in (-1, 1), got {rho}")


class MovingAverage(ModelSpec):
    """
    A two-dimensional spatial moving average eps_i = sum_k C_k eta_{i+k} over offsets |k| <= d, given by the
    (2d+1) x (2d+1) stencil C. The autocovariance at shift h is sum_k C_k C_{k+h} and the asymptotic variance is
    (sum_k C_k)^2.
    """

    def stencil(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def q(self) -> int:
        return 2

    @property
    def order(self) -> int:
        return (self.stencil().shape[0] - 1) // 2

    def simulate(self, shape, rng):
        c = self.stencil()
        d = (c.shape[0] - 1) // 2
        eta = rng.standard_normal(tuple(n + 2 * d for n in shape))
        return signal.correlate(eta, c, mode='valid')[..., np.newaxis]

    def sigma2(self) -> float:
        return float(np.sum(self.stencil())) ** 2

    def autocov_table(self) -> np.ndarray:
        """Autocovariances for shifts -2d..2d on both axes; zero beyond."""
        c = self.stencil()
        return signal.correlate(c, c, mode='full', method='direct')

    def autocov(self, lag) -> float:
        lag = lag if isinstance(lag, Lag) else Lag(lag)
        if lag.q != 2:
            raise ValueError(f"{self.describe()} is two-dimensional, got lag {lag.j}")
        d = self.order
        if lag.star > 2 * d:
            return 0.0
        return float(self.autocov_table()[lag[0] + 2 * d, lag[1] + 2 * d])


@dataclass(frozen=True)
class M1(MovingAverage):
    """Order-one spatial moving average; a lists the weights of the 3x3 neighbourhood row by row."""
    a: Tuple[float, ...] = M1_DEFAULT_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, 'a', tuple(float(x) for x in self.a))
        if len(self.a) != 9 or not all(math.isfinite(x) for x in self.a):
            raise ValueError(f"M1 needs 9 finite weights, got {self.a}")

    def stencil(self):
        return np.array(self.a).reshape(3, 3)

    def describe(self):
        return f"M1(a={','.join(f'{x:g}' for x in self.a)})"


@dataclass(frozen=True)
class M2(MovingAverage):
    """Order-three spatial moving average with weight 1 at the centre and a1, a2, a3 on the max-norm rings 1..3."""
    a1: float = 0.5
    a2: float = 0.3
    a3: float = 0.1

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.a1, self.a2, self.a3)):
            raise ValueError("M2 ring weights must be finite")

    def stencil(self):
        rings = np.array([1.0, self.a1, self.a2, self.a3])
        k = np.arange(-3, 4)
        return rings[np.maximum.outer(np.abs(k), np.abs(k))]

    def describe(self):
        return f"M2(a1={self.a1:g},a2={self.a2:g},a3={self.a3:g})"


@dataclass(frozen=True)
class SMA2D(MovingAverage):
    """
    Spatial moving average of order d with an arbitrary (2d+1) x (2d+1) coefficient table theta. With
    add_innovation the bare innovation eta_i is added on top, as in xi_i = sum_k theta_k eta_{i+k} + eta_i.
    """
    theta: Tuple[Tuple[float, ...], ...] = ((0.0,),)
    add_innovation: bool = True

    def __post_init__(self):
        theta = tuple(tuple(float(x) for x in row) for row in self.theta)
        object.__setattr__(self, 'theta', theta)
        size = len(theta)
        if size % 2 != 1 or any(len(row) != size for row in theta):
            raise ValueError("theta must be a square table with odd side 2d+1")
        if not all(math.isfinite(x) for row in theta for x in row):
            raise ValueError("theta must be finite")

    def stencil(self):
        c = np.array(self.theta)
        if self.add_innovation:
            d = (c.shape[0] - 1) // 2
            c[d, d] += 1.0
        return c

    def describe(self):
        return f"SMA2D(d={self.order})"


@dataclass(frozen=True)
class M5(MovingAverage):
    """Order-d moving average with theta_j = rho^{||j||_2} plus the bare innovation."""
    rho: float = 0.3
    d: int = M5_DEFAULT_ORDER

    def __post_init__(self):
        _check_rho(self.rho)
        if self.rho < 0:
            raise ValueError(f"M5 coefficients rho^||j|| are real only for rho >= 0, got {self.rho}")
        if self.d < 0:
            raise ValueError(f"M5 order must be >= 0, got {self.d}")

    def stencil(self):
        k = np.arange(-self.d, self.d + 1, dtype=np.float64)
        c = np.power(self.rho, np.sqrt(np.add.outer(k ** 2, k ** 2)))
        c[self.d, self.d] += 1.0
        return c

    def describe(self):
        return f"M5(rho={self.rho:g},d={self.d})"


def ar1_autocov(rho: float, h: int) -> float:
    """Autocovariance of a stationary AR(1) with unit innovation variance."""
    return rho ** abs(h) / (1.0 - rho * rho)


def ar1_sample(rho: float, shape, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) paths along axis 0; the first value is drawn from N(0, 1/(1 - rho^2))."""
    u = rng.standard_normal(shape)
    u[0] /= math.sqrt(1.0 - rho * rho)
    return signal.lfilter([1.0], [1.0, -rho], u, axis=0)


@dataclass(frozen=True)
class M4(ModelSpec):
    """
    Space-time mixture eps_{t,i,j} = X_{t,i,j} + v_{t,i,j}: X is an AR(1) in time at every site and v an
    independent M1 field at every time point.
    """
    rho: float = 0.2
    a: Tuple[float, ...] = M1_DEFAULT_WEIGHTS

    def __post_init__(self):
        _check_rho(self.rho)
        object.__setattr__(self, 'a', M1(self.a).a)

    @property
    def q(self):
        return 3

    def simulate(self, shape, rng):
        x = ar1_sample(self.rho, shape, rng)
        eta = rng.standard_normal((shape[0], shape[1] + 2, shape[2] + 2))
        v = signal.correlate(eta, M1(self.a).stencil()[np.newaxis], mode='valid')
        return (x + v)[..., np.newaxis]

    def sigma2(self):
        return 1.0 / (1.0 - self.rho) ** 2 + M1(self.a).sigma2()

    def autocov(self, lag):
        lag = lag if isinstance(lag, Lag) else Lag(lag)
        if lag.q != 3:
            raise ValueError(f"M4 is three-dimensional, got lag {lag.j}")
        ht, hi, hj = lag
        value = 0.0
        if hi == 0 and hj == 0:
            value += ar1_autocov(self.rho, ht)
        if ht == 0:
            value += M1(self.a).autocov((hi, hj))
        return value

    def describe(self):
        return f"M4(rho={self.rho:g},a={','.join(f'{x:g}' for x in self.a)})"


@dataclass(frozen=True)
class Multiplicative(ModelSpec):
    """xi_{(t, s)} = eps^T_t * eps^S_s: a stationary AR(1) time series times an independent spatial field."""
    rho_t: float = 0.5
    spatial: ModelSpec = dataclass_field(default_factory=M1)

    def __post_init__(self):
        _check_rho(self.rho_t, 'rho_t')

    @property
    def q(self):
        return 1 + self.spatial.q

    @property
    def p(self):
        return self.spatial.p

    def simulate(self, shape, rng):
        temporal = ar1_sample(self.rho_t, (shape[0],), rng)
        spatial = self.spatial.simulate(tuple(shape[1:]), rng)
        return temporal.reshape((-1,) + (1,) * (len(shape) - 1) + (1,)) * spatial[np.newaxis]

    def sigma2(self):
        return self.spatial.sigma2() / (1.0 - self.rho_t) ** 2

    def autocov(self, lag):
        lag = lag if isinstance(lag, Lag) else Lag(lag)
        if lag.q != self.q:
            raise ValueError(f"{self.describe()} is {self.q}-dimensional, got lag {lag.j}")
        return ar1_autocov(self.rho_t, lag[0]) * self.spatial.autocov(Lag(lag.j[1:]))

    def describe(self):
        return f"Multiplicative(rho_t={self.rho_t:g},{self.spatial.describe()})"


@dataclass(frozen=True)
class VectorMix(ModelSpec):
    """
    p-variate field L (eps^(1), ..., eps^(k))' built from k independent univariate fields through the p x k
    loading matrix L. Its asymptotic variance is L diag(sigma^2_1, ..., sigma^2_k) L'.
    """
    loading: Tuple[Tuple[float, ...], ...] = ((1.0, 0.0), (0.5, 1.0))
    base: Tuple[ModelSpec, ...] = (M1(), M1())

    def __post_init__(self):
        loading = tuple(tuple(float(x) for x in row) for row in self.loading)
        object.__setattr__(self, 'loading', loading)
        object.__setattr__(self, 'base', tuple(self.base))
        if not self.base or any(len(row) != len(self.base) for row in loading):
            raise ValueError(f"loading must be p x {len(self.base)} to mix {len(self.base)} base fields")
        if any(b.p != 1 for b in self.base) or len({b.q for b in self.base}) != 1:
            raise ValueError("base fields must be univariate and share one grid dimension")

    @property
    def q(self):
        return self.base[0].q

    @property
    def p(self):
        return len(self.loading)

    def simulate(self, shape, rng):
        stacked = np.concatenate([b.simulate(shape, rng) for b in self.base], axis=-1)
        return stacked @ np.array(self.loading).T

    def sigma2(self) -> np.ndarray:
        loading = np.array(self.loading)
        return loading @ np.diag([b.sigma2() for b in self.base]) @ loading.T

    def describe(self):
        return f"VectorMix(p={self.p},{'+'.join(b.describe() for b in self.base)})"


def m1_default() -> M1:
    return M1()


def white_noise() -> M1:
    return M1((0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0))


def m2_default() -> M2:
    return M2()


def m4_default(rho: float = 0.2) -> M4:
    return M4(rho)


def m5(rho: float, order: int = M5_DEFAULT_ORDER) -> M5:
    return M5(rho, order)


def simulate(spec: ModelSpec, shape: Sequence[int], seed: SeedSpec) -> Field:
    shape = as_int_vector(shape, 'shape')
    if len(shape) != spec.q:
        raise ValueError(f"{spec.describe()} lives on {spec.q}-dimensional grids, got shape {shape}")
    if any(n < 1 for n in shape):
        raise ValueError(f"shape must be positive, got {shape}")
    return Field(spec.simulate(shape, seed.generator()))


def analytic_sigma2(spec: ModelSpec):
    return spec.sigma2()


def analytic_autocov(spec: ModelSpec, lag) -> float:
    return spec.autocov(lag if isinstance(lag, Lag) else Lag(lag))


def analytic_ring_sum(spec: ModelSpec, k: int) -> float:
    """r(k 1): the autocovariances summed over the max-norm shell of radius k."""
    return math.fsum(spec.autocov(lag) for lag in ring_lags(k, spec.q))


MODEL_NAMES = ('m1', 'm2', 'm4', 'm5', 'white', 'multiplicative')


def model_from_params(params: Mapping[str, object]) -> ModelSpec:
    """
    Builds a model from flat configuration values: model, a (off-centre M1 weight, or 9 comma-separated weights),
    a5, a1, a2, a3, rho, order, rho_t.
    """
    params = {k: v for k, v in params.items() if v is not None and str(v).strip() != ''}
    name = str(params.get('model', 'm1')).strip().lower()

    def m1_weights():
        a = params.get('a')
        if a is None:
            weights = list(M1_DEFAULT_WEIGHTS)
        else:
            values = [float(x) for x in str(a).split(',')]
            if len(values) == 9:
                weights = values
            elif len(values) == 1:
                weights = [values[0]] * 9
            else:
                raise ValueError(f"a must be one value or nine, got {len(values)}")
        if params.get('a5') is not None:
            weights[4] = float(params['a5'])
        elif a is not None and len(str(a).split(',')) == 1:
            weights[4] = M1_DEFAULT_WEIGHTS[4]
        return tuple(weights)

    if name == 'm1':
        return M1(m1_weights())
    if name == 'white':
        return white_noise()
    if name == 'm2':
        return M2(float(params.get('a1', 0.5)), float(params.get('a2', 0.3)), float(params.get('a3', 0.1)))
    if name == 'm4':
        return M4(float(params.get('rho', 0.2)), m1_weights())
    if name == 'm5':
        return M5(float(params.get('rho', 0.3)), int(params.get('order', M5_DEFAULT_ORDER)))
    if name == 'multiplicative':
        return Multiplicative(float(params.get('rho_t', 0.5)), M1(m1_weights()))
    raise ValueError(f"unknown model '{name}', expected one of {'|'.join(MODEL_NAMES)}")
