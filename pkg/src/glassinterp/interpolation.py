"""Log-sum-exp, its Gibbs derivatives, and the Gaussian comparison machinery.

``f(x) = log sum_i w_i exp(x_i)`` has gradient ``mu`` (the Gibbs weights) and
Hessian ``diag(mu) - mu mu^T``. For two centred Gaussian vectors the
interpolation identity

    E f(Y) - E f(X) = 1/2 int_0^1 E Tr((C^Y - C^X) Hess f(Z(t))) dt,
    Z(t) = sqrt(1 - t) X + sqrt(t) Y,

turns a sign condition on ``Tr(D Hess f)`` into ``E f(Y) >= E f(X)``. The
trace equals ``G(mu) = sum_i mu_i D_ii - mu^T D mu``, which is non-negative on
the whole simplex iff ``D_ii + D_jj - 2 D_ij >= 0`` for every pair, i.e.
iff the L2 metric of ``Y`` dominates that of ``X``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _rng, kernels
from .errors import DimensionMismatch, GlassInterpError, NonFinite
from .gaussian_core import (
    CovarianceLike,
    as_covariance,
    factor_covariance,
    sample_gaussian,
)

DEFAULT_T_NODES = 16
SIGMA_LEVEL = 3.0


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True).ravel()
        if w.size == 0 or not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise GlassInterpError("weights must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.size

    @property
    def log_w(self) -> np.ndarray:
        return np.log(self.w)

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(np.ones(n))


def _weights(w, n: int) -> WeightVector:
    if w is None:
        return WeightVector.uniform(n)
    w = w if isinstance(w, WeightVector) else WeightVector(w)
    if w.n != n:
        raise DimensionMismatch(f"{w.n} weights for dimension {n}")
    return w


@dataclass(frozen=True)
class QuenchedEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int

    @classmethod
    def from_values(cls, values: np.ndarray, seed: int) -> "QuenchedEstimate":
        values = np.asarray(values, dtype=np.float64)
        m = values.size
        if m < 2:
            raise GlassInterpError("a quenched estimate needs at least 2 samples")
        # shift by the first value: exact when all samples coincide
        shifted = values - values[0]
        mean = float(values[0] + shifted.sum() / m)
        stderr = float(shifted.std(ddof=1) / math.sqrt(m))
        return cls(mean, stderr, m, seed)


def combined_stderr(*estimates: QuenchedEstimate) -> float:
    return math.sqrt(sum(e.stderr**2 for e in estimates))


def _finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFinite("input contains non-finite entries")
    return x


def log_partition_f(x, w=None) -> float:
    x = _finite(x).ravel()
    w = _weights(w, x.size)
    return float(kernels.logsumexp_rows((x + w.log_w)[None, :])[0])


def gibbs_weights(x, w=None) -> np.ndarray:
    x = _finite(x).ravel()
    w = _weights(w, x.size)
    y = x + w.log_w
    e = np.exp(y - y.max())
    return e / e.sum()


def hessian_f(x, w=None) -> np.ndarray:
    mu = gibbs_weights(x, w)
    return np.diag(mu) - np.outer(mu, mu)


def gradient_f(x, w=None) -> np.ndarray:
    return gibbs_weights(x, w)


def estimate_F(C: CovarianceLike, w=None, m: int = 10_000, seed: int = 0) -> QuenchedEstimate:
    """Monte Carlo ``E log sum_i w_i exp(X_i)`` for ``X ~ N(0, C)``."""
    C = as_covariance(C)
    w = _weights(w, C.n)
    X = sample_gaussian(factor_covariance(C), _rng.derive_seed(seed, "F"), m)
    return QuenchedEstimate.from_values(kernels.logsumexp_rows(X + w.log_w), seed)


def gauss_legendre_unit(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, wt = np.polynomial.legendre.leggauss(nodes)
    return (x + 1.0) / 2.0, wt / 2.0


def interpolation_rhs(Cx: CovarianceLike, Cy: CovarianceLike, w=None,
                      t_nodes: int = DEFAULT_T_NODES, m: int = 10_000,
                      seed: int = 0) -> QuenchedEstimate:
    """Estimate ``1/2 int_0^1 E Tr((C^Y - C^X) Hess f(Z(t))) dt``.

    ``Z(t) = sqrt(1-t) X + sqrt(t) Y`` so that ``Cov Z(t)`` runs from ``C^X``
    at ``t = 0`` to ``C^Y`` at ``t = 1``. The same ``(X, Y)`` samples are
    reused at every Gauss-Legendre node.
    """
    Cx, Cy = as_covariance(Cx), as_covariance(Cy)
    if Cx.n != Cy.n:
        raise DimensionMismatch(f"dimensions differ: {Cx.n} vs {Cy.n}")
    if t_nodes < 2:
        raise GlassInterpError("need at least 2 quadrature nodes")
    w = _weights(w, Cx.n)
    D = Cy.entries - Cx.entries
    if not np.any(D):
        return QuenchedEstimate(0.0, 0.0, m, seed)
    X = sample_gaussian(factor_covariance(Cx), _rng.derive_seed(seed, "rhs-x"), m)
    Y = sample_gaussian(factor_covariance(Cy), _rng.derive_seed(seed, "rhs-y"), m)
    acc = np.zeros(m)
    for t, wt in zip(*gauss_legendre_unit(t_nodes)):
        Z = math.sqrt(1.0 - t) * X + math.sqrt(t) * Y
        acc += wt * kernels.gibbs_trace_rows(Z + w.log_w, D)
    return QuenchedEstimate.from_values(0.5 * acc, seed)


@dataclass(frozen=True)
class ComparisonVerdict:
    classic_diag_ok: bool
    classic_offdiag_ok: bool
    metric_ok: bool
    worst_violation: float
    worst_pair: tuple[int, int]

    @property
    def classic_ok(self) -> bool:
        return self.classic_diag_ok and self.classic_offdiag_ok


def _pair(Cx, Cy):
    Cx, Cy = as_covariance(Cx), as_covariance(Cy)
    if Cx.n != Cy.n:
        raise DimensionMismatch(f"dimensions differ: {Cx.n} vs {Cy.n}")
    return Cx, Cy


def _classic(X: np.ndarray, Y: np.ndarray, tol: float):
    n = X.shape[0]
    diag_gap = np.abs(np.diag(X) - np.diag(Y))
    off = Y - X
    np.fill_diagonal(off, -np.inf)
    diag_ok = bool(np.all(diag_gap <= tol))
    off_ok = bool(np.all(off <= tol)) if n > 1 else True
    return diag_ok, off_ok, diag_gap, off


def _metric_deficit(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    # d_X^2 - d_Y^2 entrywise; positive entries are violations
    gx = np.diag(X)[:, None] + np.diag(X)[None, :] - 2.0 * X
    gy = np.diag(Y)[:, None] + np.diag(Y)[None, :] - 2.0 * Y
    return gx - gy


def _verdict(Cx, Cy, tol):
    X, Y = Cx.entries, Cy.entries
    diag_ok, off_ok, diag_gap, off = _classic(X, Y, tol)
    deficit = _metric_deficit(X, Y)
    # squared-distance comparison at 4*tol keeps "classic => metric" exact
    metric_ok = bool(np.all(deficit <= 4.0 * tol))
    return diag_ok, off_ok, metric_ok, diag_gap, off, deficit


def check_classic_conditions(Cx: CovarianceLike, Cy: CovarianceLike, tol: float = 1e-9) -> ComparisonVerdict:
    """Equal variances and ``C^X_ij >= C^Y_ij`` off the diagonal."""
    Cx, Cy = _pair(Cx, Cy)
    diag_ok, off_ok, metric_ok, diag_gap, off, _ = _verdict(Cx, Cy, tol)
    n = Cx.n
    if n == 0:
        return ComparisonVerdict(True, True, True, 0.0, (0, 0))
    i_d = int(np.argmax(diag_gap))
    worst, pair = float(diag_gap[i_d]), (i_d, i_d)
    if n > 1:
        i, j = np.unravel_index(np.argmax(off), off.shape)
        if off[i, j] > worst:
            worst, pair = float(off[i, j]), (int(i), int(j))
    return ComparisonVerdict(diag_ok, off_ok, metric_ok, worst, pair)


def check_metric_conditions(Cx: CovarianceLike, Cy: CovarianceLike, tol: float = 1e-9) -> ComparisonVerdict:
    """``d_Y(i, j) >= d_X(i, j)`` for all pairs (compared on squared distances)."""
    Cx, Cy = _pair(Cx, Cy)
    diag_ok, off_ok, metric_ok, _, _, deficit = _verdict(Cx, Cy, tol)
    if Cx.n == 0:
        return ComparisonVerdict(True, True, True, 0.0, (0, 0))
    i, j = np.unravel_index(np.argmax(deficit), deficit.shape)
    return ComparisonVerdict(diag_ok, off_ok, metric_ok, float(deficit[i, j]), (int(i), int(j)))


def _simplex_point(mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu < -1e-12) or np.any(mu > 1 + 1e-12) or abs(mu.sum() - 1.0) > 1e-12:
        raise GlassInterpError("mu must lie in the probability simplex")
    return mu


def _symmetric(D) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {D.shape}")
    return D


def simplex_G(D, mu) -> float:
    D = _symmetric(D)
    mu = _simplex_point(mu)
    if mu.size != D.shape[0]:
        raise DimensionMismatch(f"mu has {mu.size} entries for a {D.shape[0]}x{D.shape[0]} matrix")
    return float(mu @ np.diag(D) - mu @ D @ mu)


def _simplex_G_rows(D: np.ndarray, P: np.ndarray) -> np.ndarray:
    return P @ np.diag(D) - ((P @ D) * P).sum(axis=1)


GRID_RESOLUTION = 32
QUASI_RANDOM_POINTS = 10_000


@lru_cache(maxsize=None)
def _simplex_probes(n: int) -> np.ndarray:
    """Vertices, pair midpoints and a deterministic cover of the simplex."""
    probes = [np.eye(n)]
    if n > 1:
        mids = []
        for i, j in itertools.combinations(range(n), 2):
            p = np.zeros(n)
            p[i] = p[j] = 0.5
            mids.append(p)
        probes.append(np.array(mids))
    if n <= 4:
        # stars and bars: every composition of GRID_RESOLUTION into n parts
        r = GRID_RESOLUTION
        pts = []
        for bars in itertools.combinations(range(r + n - 1), n - 1):
            edges = (-1,) + bars + (r + n - 1,)
            pts.append([edges[k + 1] - edges[k] - 1 for k in range(n)])
        probes.append(np.array(pts, dtype=np.float64) / r)
    else:
        from scipy.stats import qmc

        u = qmc.Halton(d=n, scramble=False).random(QUASI_RANDOM_POINTS + 1)[1:]
        e = -np.log1p(-u)  # normalised exponentials are uniform on the simplex
        probes.append(e / e.sum(axis=1, keepdims=True))
    P = np.vstack(probes)
    P.setflags(write=False)
    return P


@dataclass(frozen=True)
class SimplexCheck:
    closed_form: bool
    brute_force: bool
    witness: np.ndarray = field(compare=False)
    min_value: float = 0.0


def simplex_G_nonneg(D, tol: float = 1e-10) -> SimplexCheck:
    """Compare the pairwise closed-form condition with a brute-force minimum of G.

    ``closed_form`` tests ``D_ii + D_jj - 2 D_ij >= -4 tol`` (the pair
    midpoint value of G is a quarter of that); ``brute_force`` tests that
    the smallest G over the probe set is ``>= -tol``.
    """
    D = _symmetric(D)
    n = D.shape[0]
    gamma = np.diag(D)[:, None] + np.diag(D)[None, :] - 2.0 * D
    closed = bool(np.all(gamma >= -4.0 * tol))
    P = _simplex_probes(n)
    vals = _simplex_G_rows(D, P)
    k = int(np.argmin(vals))
    return SimplexCheck(closed, bool(vals[k] >= -tol), P[k].copy(), float(vals[k]))


CSV_COLUMNS = (
    "n", "seed", "m", "F_x", "F_x_stderr", "F_y", "F_y_stderr",
    "classic_diag_ok", "classic_offdiag_ok", "metric_ok", "holds",
)


@dataclass(frozen=True)
class InequalityReport:
    n: int
    seed: int
    m: int
    F_x: QuenchedEstimate
    F_y: QuenchedEstimate
    classic: ComparisonVerdict
    metric: ComparisonVerdict
    holds: bool

    def csv_row(self) -> list:
        return [
            self.n, self.seed, self.m,
            self.F_x.mean, self.F_x.stderr, self.F_y.mean, self.F_y.stderr,
            self.classic.classic_diag_ok, self.classic.classic_offdiag_ok,
            self.metric.metric_ok, self.holds,
        ]


def verify_inequality(Cx: CovarianceLike, Cy: CovarianceLike, w=None,
                      m: int = 100_000, seed: int = 0, tol: float = 1e-9) -> InequalityReport:
    """Check the comparison conditions and estimate ``F(C^X)``, ``F(C^Y)``.

    ``holds`` is ``F(C^Y) >= F(C^X) - 3 sigma`` with independent draws for
    the two sides.
    """
    Cx, Cy = _pair(Cx, Cy)
    classic = check_classic_conditions(Cx, Cy, tol)
    metric = check_metric_conditions(Cx, Cy, tol)
    fx = estimate_F(Cx, w, m, _rng.derive_seed(seed, "verify-x"))
    fy = estimate_F(Cy, w, m, _rng.derive_seed(seed, "verify-y"))
    holds = fy.mean >= fx.mean - SIGMA_LEVEL * combined_stderr(fx, fy)
    return InequalityReport(Cx.n, seed, m, fx, fy, classic, metric, bool(holds))
