import itertools
import math
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

Shape = Tuple[int, ...]


class Lag:
    """
    An integer offset j in Z^q between two grid points. Lags behave like small immutable vectors:
    they can be negated, iterated, compared and used as dict keys.

    a = Lag(2, -3)

    b = Lag((2, -3))  # same lag
    """
    # https://docs.python.org/3/reference/datamodel.html#slots
    __slots__ = [
        'j'
    ]

    def __init__(self, *j: Union[int, Iterable[int], 'Lag']):
        if len(j) == 1 and not isinstance(j[0], (int, np.integer)):
            j = tuple(j[0])
        self.j = tuple(int(c) for c in j)

    def __getitem__(self, item: int) -> int:
        return self.j[item]

    def __len__(self):
        return len(self.j)

    def __iter__(self):
        return iter(self.j)

    def __neg__(self) -> 'Lag':
        return Lag(tuple(-c for c in self.j))

    def __add__(self, other: 'Lag') -> 'Lag':
        return Lag(tuple(a + b for a, b in zip(self.j, other)))

    def __eq__(self, other):
        if isinstance(other, Lag):
            return self.j == other.j
        if isinstance(other, tuple):
            return self.j == other
        return NotImplemented

    def __hash__(self):
        return hash(self.j)

    def __str__(self):
        return f"Lag{self.j}"

    def __repr__(self):
        return self.__str__()

    @property
    def q(self) -> int:
        return len(self.j)

    @property
    def star(self) -> int:
        """The largest absolute component, max_i |j_i|."""
        return max((abs(c) for c in self.j), default=0)

    def norm(self) -> float:
        """Euclidean length of the lag."""
        return math.sqrt(sum(c * c for c in self.j))

    def within(self, m: Sequence[int]) -> bool:
        """True when |j_i| <= m_i for every coordinate."""
        return len(m) == len(self.j) and all(abs(c) <= mi for c, mi in zip(self.j, m))


def as_int_vector(values: Iterable[int], name: str = 'vector') -> Shape:
    out = tuple(int(v) for v in values)
    if not out:
        raise ValueError(f"{name} must have at least one component")
    return out


def overlap_count(shape: Sequence[int], lag: Union[Lag, Sequence[int]]) -> int:
    """
    Number of grid points i with both i and i + j inside the grid, i.e. prod_i max(n_i - |j_i|, 0).
    """
    if len(shape) != len(lag):
        raise ValueError(f"lag {tuple(lag)} does not match the {len(shape)}-dimensional shape {tuple(shape)}")
    count = 1
    for n, j in zip(shape, lag):
        count *= max(int(n) - abs(int(j)), 0)
    return count


def lag_box(m: Sequence[int]) -> List[Lag]:
    """All lags with |j_i| <= m_i, in lexicographic order."""
    m = as_int_vector(m, 'm')
    if any(mi < 0 for mi in m):
        raise ValueError(f"m must be componentwise >= 0, got {m}")
    return [Lag(j) for j in itertools.product(*(range(-mi, mi + 1) for mi in m))]


def ring_lags(k: int, q: int) -> List[Lag]:
    """The max-norm shell {j in Z^q : max_i |j_i| = k}."""
    if k < 0:
        raise ValueError(f"ring index must be >= 0, got {k}")
    if q < 1:
        raise ValueError(f"q must be positive, got {q}")
    return [Lag(j) for j in itertools.product(range(-k, k + 1), repeat=q) if max(abs(c) for c in j) == k]


class Field:
    """
    Dense p-variate observations on a q-dimensional rectangular grid. The values live in an array of shape
    (n_1, ..., n_q, p); flattening it in C order gives the canonical linearization (lexicographic by
    coordinate, channel innermost). Fields are immutable: the array is copied and marked read-only.
    """
    __slots__ = [
        'values'
    ]

    def __init__(self, values: np.ndarray):
        values = np.array(values, dtype=np.float64, copy=True)
        if values.ndim < 2:
            raise ValueError("field values need at least one grid axis and a channel axis")
        if values.size == 0 or any(n < 1 for n in values.shape):
            raise ValueError(f"field shape must be positive in every axis, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains NaN or infinite values")
        values.flags.writeable = False
        self.values = values

    @classmethod
    def from_array(cls, values, p: int = None) -> 'Field':
        """
        Wraps an array. Without p every axis is a grid axis and the field is univariate; with p the last
        axis must have length p and holds the channels.
        """
        values = np.asarray(values, dtype=np.float64)
        if p is None:
            return cls(values[..., np.newaxis])
        if values.ndim < 2 or values.shape[-1] != p:
            raise ValueError(f"expected a trailing channel axis of length {p}, got shape {values.shape}")
        return cls(values)

    @classmethod
    def from_flat(cls, shape: Sequence[int], p: int, data: Sequence[float]) -> 'Field':
        shape = as_int_vector(shape, 'shape')
        data = np.asarray(data, dtype=np.float64)
        expected = p * math.prod(shape)
        if data.size != expected:
            raise ValueError(f"expected {expected} values for shape {shape} and p={p}, got {data.size}")
        return cls(data.reshape(shape + (p,)))

    @property
    def shape(self) -> Shape:
        return self.values.shape[:-1]

    @property
    def q(self) -> int:
        return self.values.ndim - 1

    @property
    def p(self) -> int:
        return self.values.shape[-1]

    @property
    def size(self) -> int:
        """Number of grid points |n| = n_1 * ... * n_q."""
        return math.prod(self.shape)

    @property
    def data(self) -> np.ndarray:
        """The canonical linearization as a flat read-only array."""
        return self.values.reshape(-1)

    def scalar_values(self) -> np.ndarray:
        """The grid array without the channel axis; only defined for univariate fields."""
        if self.p != 1:
            raise ValueError(f"expected a univariate field, got p={self.p}")
        return self.values[..., 0]

    def block(self, origin: Sequence[int], size: Sequence[int]) -> 'Field':
        """The sub-field on origin + {0..size-1}; must lie inside the grid."""
        if len(origin) != self.q or len(size) != self.q:
            raise ValueError("origin and size must match the field dimension")
        slices = []
        for o, b, n in zip(origin, size, self.shape):
            if o < 0 or b < 1 or o + b > n:
                raise ValueError(f"block origin={tuple(origin)} size={tuple(size)} leaves the grid {self.shape}")
            slices.append(slice(o, o + b))
        return Field(self.values[tuple(slices)])

    def scaled(self, factor: float) -> 'Field':
        return Field(self.values * factor)

    def __str__(self):
        return f"Field(shape={self.shape}, p={self.p})"

    def __repr__(self):
        return self.__str__()
