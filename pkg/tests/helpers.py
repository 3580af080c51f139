import numpy as np

ACCEPTANCE_LINES: list[str] = []


def random_covariance(rng, n: int, rank: int | None = None) -> np.ndarray:
    r = rank or n
    A = rng.standard_normal((n, r)) / np.sqrt(r)
    return A @ A.T


def random_factor_rows(rng, n: int, k: int, rank: int) -> np.ndarray:
    """``n`` points in ``R^k`` spanning a ``rank``-dimensional subspace."""
    return rng.standard_normal((n, rank)) @ rng.standard_normal((rank, k))
