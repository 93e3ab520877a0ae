import numpy as np


def as_cov_matrix(a) -> np.ndarray:
    """Returns a as a square float64 matrix; scalars become 1x1."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square p x p matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or infinite entries")
    return a


def max_norm(a) -> float:
    """The matrix maximum norm, max |a_ij|."""
    return float(np.max(np.abs(as_cov_matrix(a))))


def frobenius_norm(a) -> float:
    """sqrt of the sum of squared entries. Satisfies max_norm(a) <= frobenius_norm(a) <= p * max_norm(a)."""
    return float(np.linalg.norm(as_cov_matrix(a), 'fro'))


def scalar_or_matrix(a: np.ndarray):
    """1x1 matrices come back as floats, which is what univariate callers expect."""
    if a.shape == (1, 1):
        return float(a[0, 0])
    return a
