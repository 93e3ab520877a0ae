import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from util.grid import Lag

# Below this |x| the quadratic spectral weight is its limit, 1.
QS_ZERO_THRESHOLD = 1e-8
# Below this |z| = 6*pi*|x|/5 the closed form loses digits to cancellation, so its series is used.
QS_SERIES_THRESHOLD = 1e-2


class KernelKind(Enum):
    CONSTANT = 'constant'
    BARTLETT = 'bartlett'
    TUKEY_HANNING = 'tukey_hanning'
    QUADRATIC_SPECTRAL = 'quadratic_spectral'


KERNEL_NAMES = {
    'constant': KernelKind.CONSTANT,
    'bartlett': KernelKind.BARTLETT,
    'tukey': KernelKind.TUKEY_HANNING,
    'tukey_hanning': KernelKind.TUKEY_HANNING,
    'qs': KernelKind.QUADRATIC_SPECTRAL,
    'quadratic_spectral': KernelKind.QUADRATIC_SPECTRAL,
}

# Documented |w| <= C_w per kernel.
KERNEL_BOUNDS = {
    KernelKind.CONSTANT: 1.0,
    KernelKind.BARTLETT: 1.0,
    KernelKind.TUKEY_HANNING: 1.0,
    KernelKind.QUADRATIC_SPECTRAL: 1.2,
}


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.CONSTANT
    bandwidth_bw: float = 0.0  # only read by the quadratic spectral kernel

    def __post_init__(self):
        if not isinstance(self.kind, KernelKind):
            object.__setattr__(self, 'kind', KernelKind(self.kind))
        if not self.bandwidth_bw >= 0:
            raise ValueError(f"kernel bandwidth must be >= 0, got {self.bandwidth_bw}")

    @classmethod
    def from_name(cls, name: str, qs_bandwidth: float = 0.0) -> 'KernelSpec':
        try:
            kind = KERNEL_NAMES[name.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown kernel '{name}', expected one of constant|bartlett|tukey|qs") from None
        return cls(kind, float(qs_bandwidth) if kind is KernelKind.QUADRATIC_SPECTRAL else 0.0)

    @property
    def bound(self) -> float:
        return KERNEL_BOUNDS[self.kind]

    @property
    def name(self) -> str:
        if self.kind is KernelKind.QUADRATIC_SPECTRAL:
            return f"qs({self.bandwidth_bw:g})"
        return self.kind.value


CONSTANT = KernelSpec(KernelKind.CONSTANT)


def quadratic_spectral(x: float) -> float:
    """25/(12 pi^2 x^2) * (sin(6 pi x/5)/(6 pi x/5) - cos(6 pi x/5)), continuously extended by 1 at x = 0."""
    if abs(x) < QS_ZERO_THRESHOLD:
        return 1.0
    z = 6.0 * math.pi * x / 5.0
    if abs(z) < QS_SERIES_THRESHOLD:
        z2 = z * z
        return 1.0 - z2 / 10.0 + z2 * z2 / 280.0
    return 25.0 / (12.0 * math.pi ** 2 * x * x) * (math.sin(z) / z - math.cos(z))


def weight_1d(spec: KernelSpec, j: int, m: int) -> float:
    """The one-dimensional weight w_m(j)."""
    if m <= 0:
        raise ValueError(f"lag truncation m must be >= 1, got {m}")
    a = abs(j)
    if spec.kind is KernelKind.CONSTANT:
        return 1.0
    if spec.kind is KernelKind.BARTLETT:
        return max(0.0, 1.0 - a / m)
    if spec.kind is KernelKind.TUKEY_HANNING:
        if a > m:
            return 0.0
        return (1.0 + math.cos(math.pi * a / m)) / 2.0
    return quadratic_spectral(j / (m + spec.bandwidth_bw))


def weight(spec: KernelSpec, lag: Lag, m: Sequence[int]) -> float:
    """The product weight w_m(j) = prod_i w_{m_i}(j_i) for a lag inside the box |j| <= m."""
    lag = lag if isinstance(lag, Lag) else Lag(lag)
    if len(m) != len(lag):
        raise ValueError(f"lag {lag.j} and m {tuple(m)} differ in dimension")
    if not lag.within(m):
        raise ValueError(f"lag {lag.j} lies outside the box |j| <= {tuple(m)}")
    w = 1.0
    for j, mi in zip(lag, m):
        w *= weight_1d(spec, j, mi)
    return w


def axis_weights(spec: KernelSpec, m_i: int) -> np.ndarray:
    """
    Weights over lags -m_i..m_i along one axis. A zero-width axis (m_i = 0) has the single lag 0 with weight 1.
    """
    if m_i < 0:
        raise ValueError(f"lag truncation must be >= 0, got {m_i}")
    if m_i == 0:
        return np.ones(1)
    return np.array([weight_1d(spec, j, m_i) for j in range(-m_i, m_i + 1)])


def weight_grid(spec: KernelSpec, m: Sequence[int]) -> np.ndarray:
    """All product weights for the box |j| <= m as an array of shape (2m_1+1, ..., 2m_q+1)."""
    grid = np.ones(())
    for m_i in m:
        grid = np.multiply.outer(grid, axis_weights(spec, m_i))
    return grid
