"""Covariance matrices, Gaussian sampling and the L2 metric of a Gaussian vector.

A centred Gaussian vector ``X`` with covariance ``C`` carries the
pseudo-metric ``d(i, j) = sqrt(C_ii + C_jj - 2 C_ij)``. Finite metrics of this
form are exactly the Euclidean ones, and two covariances share a metric iff
their vectors differ by a common additive Gaussian shift.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _rng
from .errors import (
    DimensionMismatch,
    FactorizationFailed,
    NegativeRadicand,
    NotPSD,
    NotSymmetric,
)

DEFAULT_PSD_TOL = 1e-9
DEFAULT_RIDGE = 1e-10
FACTOR_TOL = 1e-9
SAMPLE_CHUNK = 4096


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _scale(M: np.ndarray) -> float:
    n = M.shape[0]
    return max(1.0, abs(float(np.trace(M))) / n) if n else 1.0


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric PSD matrix, validated on construction via :func:`validate_covariance`."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def triangle_defect(self) -> float:
        """Largest ``d_ij - d_ik - d_kj`` over all triples (<= 0 for a pseudo-metric)."""
        d = self.entries
        if self.n < 3:
            return 0.0
        # axis order (i, j, k): d_ij - d_ik - d_kj
        return float((d[:, :, None] - d[:, None, :] - d.T[None, :, :]).max())


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    """``A`` with ``A @ A.T`` reproducing a covariance; rows are the Gram points."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


CovarianceLike = Union[CovarianceMatrix, np.ndarray, Sequence[Sequence[float]]]


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    return M


def validate_covariance(M, psd_tol: float = DEFAULT_PSD_TOL) -> CovarianceMatrix:
    """Check symmetry and positive semidefiniteness, relative to ``max(1, trace/n)``.

    The matrix is symmetrised as ``(M + M.T) / 2`` before the eigenvalue test.
    """
    if isinstance(M, CovarianceMatrix):
        return M
    M = _square(M)
    if not np.all(np.isfinite(M)):
        raise NotPSD(float("nan"), psd_tol)
    tol = psd_tol * _scale(M)
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym > tol:
        raise NotSymmetric(asym, tol)
    S = (M + M.T) / 2.0
    if S.size:
        lam = float(np.linalg.eigvalsh(S)[0])
        if lam < -tol:
            raise NotPSD(lam, tol)
    return CovarianceMatrix(_frozen(S))


def as_covariance(C: CovarianceLike) -> CovarianceMatrix:
    return C if isinstance(C, CovarianceMatrix) else validate_covariance(C)


def metric_from_covariance(C: CovarianceLike, psd_tol: float = DEFAULT_PSD_TOL) -> MetricMatrix:
    C = as_covariance(C).entries
    diag = np.diag(C)
    rad = diag[:, None] + diag[None, :] - 2.0 * C
    tol = psd_tol * _scale(C)
    if rad.size and rad.min() < -tol:
        i, j = np.unravel_index(np.argmin(rad), rad.shape)
        raise NegativeRadicand(
            f"C_ii + C_jj - 2 C_ij = {rad[i, j]:.3e} at ({i}, {j}); not a covariance"
        )
    d = np.sqrt(np.clip(rad, 0.0, None))
    np.fill_diagonal(d, 0.0)
    return MetricMatrix(_frozen(d))


def pairwise_distances(points) -> np.ndarray:
    P = np.asarray(points, dtype=np.float64)
    diff = P[:, None, :] - P[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def gram_from_points(points) -> CovarianceMatrix:
    """Gram matrix ``C_ij = (p_i, p_j)`` of ``n`` points in ``R^k`` (rows)."""
    try:
        P = np.asarray(points, dtype=np.float64)
    except ValueError as exc:  # ragged input
        raise DimensionMismatch("points must all have the same dimension") from exc
    if P.ndim != 2:
        raise DimensionMismatch(f"expected an (n, k) array of points, got shape {P.shape}")
    G = P @ P.T
    return validate_covariance((G + G.T) / 2.0)


def factor_covariance(C: CovarianceLike, ridge: float | None = None) -> FactorMatrix:
    """Lower-triangular ``A`` with ``A A^T = C`` (up to a small ridge).

    Coordinates of exactly zero variance are deterministic and get zero rows.
    The remaining block is Cholesky-factored directly, and again with
    ``ridge * max(1, trace/n)`` added to the diagonal if that fails.
    """
    C = as_covariance(C).entries
    n = C.shape[0]
    A = np.zeros((n, n))
    live = np.flatnonzero(np.diag(C) > 0.0)
    if live.size == 0:
        return FactorMatrix(_frozen(A))
    sub = C[np.ix_(live, live)]
    try:
        L = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        eps = (DEFAULT_RIDGE if ridge is None else ridge) * _scale(sub)
        try:
            L = np.linalg.cholesky(sub + eps * np.eye(live.size))
        except np.linalg.LinAlgError as exc:
            raise FactorizationFailed(
                f"Cholesky failed even with ridge {eps:.3e}; input is not a covariance"
            ) from exc
    A[np.ix_(live, live)] = L
    return FactorMatrix(_frozen(A))


def standard_normals(seed: int, n: int, m: int, start: int = 0) -> np.ndarray:
    """Rows ``start .. start+m-1`` of the i.i.d. N(0,1) stream keyed by ``seed``.

    Row ``k`` depends only on ``(seed, k)``: rows are generated in chunks of
    :data:`SAMPLE_CHUNK` and each chunk has its own counter-based stream.
    """
    out = np.empty((m, n))
    first, last = start // SAMPLE_CHUNK, (start + m - 1) // SAMPLE_CHUNK if m else -1
    pos = 0
    for chunk in range(first, last + 1):
        z = _rng.stream(seed, chunk, _rng.TAG_GAUSS).standard_normal((SAMPLE_CHUNK, n))
        lo = max(start - chunk * SAMPLE_CHUNK, 0)
        hi = min(start + m - chunk * SAMPLE_CHUNK, SAMPLE_CHUNK)
        out[pos : pos + hi - lo] = z[lo:hi]
        pos += hi - lo
    return out


def sample_gaussian(A: FactorMatrix | np.ndarray, seed: int, m: int, start: int = 0) -> np.ndarray:
    """``m`` samples ``A z`` as rows of an ``(m, n)`` array.

    The product is accumulated column by column in fixed order so each row is
    bit-identical no matter which slice of the index range is requested.
    """
    A = np.asarray(A, dtype=np.float64)
    n, k = A.shape
    Z = standard_normals(seed, k, m, start)
    X = np.zeros((m, n))
    for j in range(k):
        X += Z[:, j : j + 1] * A[:, j]
    return X


def is_euclidean_metric(d: MetricMatrix | np.ndarray, eig_tol: float | None = None):
    """Classical-MDS test: ``-1/2 J d^2 J`` must be PSD.

    Returns ``(verdict, gram, min_eigenvalue)``. ``eig_tol`` defaults to
    ``1e-9 * max(1, max d^2)``.
    """
    D = _square(d)
    n = D.shape[0]
    if n == 0:
        return True, np.zeros((0, 0)), 0.0
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    G = -0.5 * J @ (D * D) @ J
    G = (G + G.T) / 2.0
    lam = float(np.linalg.eigvalsh(G)[0])
    if eig_tol is None:
        eig_tol = 1e-9 * max(1.0, float((D * D).max()))
    return lam >= -eig_tol, G, lam


def metrics_equal(Cx: CovarianceLike, Cy: CovarianceLike, tol: float = 1e-9) -> bool:
    Cx, Cy = as_covariance(Cx), as_covariance(Cy)
    if Cx.n != Cy.n:
        raise DimensionMismatch(f"dimensions differ: {Cx.n} vs {Cy.n}")
    dx = metric_from_covariance(Cx).entries
    dy = metric_from_covariance(Cy).entries
    return bool(np.all(np.abs(dx - dy) <= tol))


def shifted_covariance(C: CovarianceLike, coeffs) -> CovarianceMatrix:
    """Covariance of ``X_i + W`` with ``W = sum_k coeffs[k] X_k``.

    Shares the metric of ``C`` by construction.
    """
    C = as_covariance(C).entries
    c = np.asarray(coeffs, dtype=np.float64)
    Cc = C @ c
    return validate_covariance(C + Cc[:, None] + Cc[None, :] + c @ Cc)
