"""Recover orthogonal maps and rigid motions between point sets.

Equal Gram matrices determine the points up to an orthogonal map, and equal
pairwise distances determine them up to an orthogonal map plus a
translation. Rank-deficient sets are completed with an orthonormal basis of
the complement of their span before the map is solved for.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, HypothesisViolated
from .gaussian_core import CovarianceLike, factor_covariance, metrics_equal, pairwise_distances

DEFAULT_TOL = 1e-8
ORTHO_TOL = 1e-10
RANK_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class RigidMotion:
    O: np.ndarray
    b: np.ndarray

    def apply(self, V) -> np.ndarray:
        return np.asarray(V, dtype=np.float64) @ self.O.T + self.b

    def orthogonality_defect(self) -> float:
        k = self.O.shape[0]
        return float(np.max(np.abs(self.O.T @ self.O - np.eye(k)))) if k else 0.0


def _points_pair(V, W) -> tuple[np.ndarray, np.ndarray]:
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    if V.shape != W.shape:
        raise DimensionMismatch(f"point sets have shapes {V.shape} and {W.shape}")
    return V, W


def _worst(diff: np.ndarray) -> tuple[float, tuple[int, int]]:
    i, j = np.unravel_index(np.argmax(diff), diff.shape)
    return float(diff[i, j]), (int(i), int(j))


def _span_and_complement(P: np.ndarray, rank: int) -> np.ndarray:
    # rows of Vt beyond the rank form an orthonormal basis of the complement
    _, _, Vt = np.linalg.svd(P, full_matrices=True)
    return Vt[rank:]


def _numeric_rank(P: np.ndarray) -> int:
    if P.size == 0:
        return 0
    s = np.linalg.svd(P, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def _orthogonal_map(V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Orthogonal ``O`` with ``O v_i = w_i``, assuming equal Gram matrices."""
    k = V.shape[1]
    r = _numeric_rank(V)
    Vb = np.vstack([V, _span_and_complement(V, r)])
    Wb = np.vstack([W, _span_and_complement(W, r)])
    # polar factor of the cross-covariance of the completed bases
    U, _, Vt = np.linalg.svd(Wb.T @ Vb)
    O = U @ Vt
    return O if k else np.zeros((0, 0))


def recover_rotation(V, W, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal ``O`` with ``w_i = O v_i`` for point sets given as rows.

    Raises :class:`HypothesisViolated` when the Gram matrices differ by more
    than ``tol * max(1, max |G|)``.
    """
    V, W = _points_pair(V, W)
    Gv, Gw = V @ V.T, W @ W.T
    scale = max(1.0, float(np.abs(Gv).max()) if Gv.size else 1.0)
    worst, pair = _worst(np.abs(Gv - Gw))
    if worst > tol * scale:
        raise HypothesisViolated("inner products differ", worst, pair)
    return _orthogonal_map(V, W)


def recover_isometry(V, W, tol: float = DEFAULT_TOL) -> RigidMotion:
    """Rigid motion ``(O, b)`` with ``w_i = O v_i + b``.

    Both sets are centred at their centroids, the orthogonal part is solved
    on the centred sets and ``b = mean(W) - O mean(V)``. The distance check
    is relative to the largest pairwise distance.
    """
    V, W = _points_pair(V, W)
    dv, dw = pairwise_distances(V), pairwise_distances(W)
    scale = float(dv.max()) if dv.size and dv.max() > 0 else 1.0
    worst, pair = _worst(np.abs(dv - dw))
    if worst > tol * scale:
        raise HypothesisViolated("pairwise distances differ", worst, pair)
    cv, cw = V.mean(axis=0), W.mean(axis=0)
    O = _orthogonal_map(V - cv, W - cw)
    return RigidMotion(O, cw - O @ cv)


def align_tolerance(V) -> float:
    V = np.asarray(V, dtype=np.float64)
    return 1e-8 * (1.0 + (float(np.abs(V).max()) if V.size else 0.0))


def residual(V, W, motion: RigidMotion) -> float:
    """``max_i |O v_i + b - w_i|``."""
    V, W = _points_pair(V, W)
    if V.size == 0:
        return 0.0
    return float(np.sqrt(((motion.apply(V) - W) ** 2).sum(axis=1)).max())


def shift_witness(Cx: CovarianceLike, Cy: CovarianceLike, tol: float = 1e-6) -> RigidMotion:
    """Rigid motion between the factor rows of two covariances with equal metrics.

    With ``A^Y = A^X O^T + 1 b^T`` the vector ``Y`` has the law of
    ``X' + W`` where ``X' = A^X O^T Z`` has covariance ``C^X`` and
    ``W = (b, Z)`` is the common shift. ``tol`` is loose by default because
    singular covariances are factored with a small ridge.
    """
    if not metrics_equal(Cx, Cy, tol=tol):
        raise HypothesisViolated("metrics differ", float("nan"), (0, 0))
    Ax = factor_covariance(Cx).entries
    Ay = factor_covariance(Cy).entries
    return recover_isometry(Ax, Ay, tol=tol)
