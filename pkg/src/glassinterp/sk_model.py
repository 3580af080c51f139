"""Sherrington-Kirkpatrick model at exact-enumeration scale.

``H_N(s) = -(1/sqrt N) sum_{i,j} J_ij s_i s_j`` over all ordered pairs,
diagonal included, with i.i.d. standard normal couplings. The vector
``(-beta H_N(s))_s`` has covariance ``N beta^2 q(s, t)^2``, whose L2 metric is
``beta sqrt(8 N d_H (1 - d_H))`` in terms of the Hamming fraction ``d_H``.

Configurations are indexed as in :mod:`glassinterp.kernels`: the first spin
is the most significant bit. Splitting ``N = N1 + N2`` puts spins
``0 .. N1-1`` in the first subsystem, so a full index ``c`` restricts to
``c >> N2`` and ``c & (2**N2 - 1)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _rng, kernels
from .errors import LengthMismatch, TooLarge
from .interpolation import SIGMA_LEVEL, QuenchedEstimate, combined_stderr

MAX_TABLE_SPINS = 20
MAX_SPLIT_SPINS = 16

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class SpinConfig:
    """Packed configuration: bit ``n - 1 - i`` of ``bits`` set iff spin ``i`` is +1."""

    bits: int
    n: int

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.bits < (1 << self.n):
            raise LengthMismatch(f"bits {self.bits} do not fit in {self.n} spins")

    @classmethod
    def from_spins(cls, spins: Sequence[int]) -> "SpinConfig":
        bits = 0
        for s in spins:
            if s not in (-1, 1):
                raise LengthMismatch(f"spins must be +-1, got {s}")
            bits = (bits << 1) | (s == 1)
        return cls(bits, len(spins))

    def spins(self) -> tuple[int, ...]:
        return tuple(1 if (self.bits >> (self.n - 1 - i)) & 1 else -1 for i in range(self.n))

    def __neg__(self) -> "SpinConfig":
        return SpinConfig(self.bits ^ ((1 << self.n) - 1), self.n)

    def restrict(self, keep: Sequence[int]) -> "SpinConfig":
        """Sub-configuration on the (ordered) global spin indices ``keep``."""
        bits = 0
        for i in keep:
            bits = (bits << 1) | ((self.bits >> (self.n - 1 - i)) & 1)
        return SpinConfig(bits, len(keep))


def _hamming(sigma: SpinConfig, tau: SpinConfig) -> int:
    if sigma.n != tau.n:
        raise LengthMismatch(f"configurations have lengths {sigma.n} and {tau.n}")
    return (sigma.bits ^ tau.bits).bit_count()


def overlap(sigma: SpinConfig, tau: SpinConfig) -> float:
    h = _hamming(sigma, tau)
    return 1.0 - 2.0 * h / sigma.n


def hamming_fraction(sigma: SpinConfig, tau: SpinConfig) -> float:
    return _hamming(sigma, tau) / sigma.n


def sk_metric_entry(sigma: SpinConfig, tau: SpinConfig, beta: float) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    h = _hamming(sigma, tau)
    n = sigma.n
    # 8 N d_H (1 - d_H) = 8 h (N - h) / N
    return beta * math.sqrt(8.0 * h * (n - h) / n)


def sk_covariance(N: int, beta: float = 1.0) -> np.ndarray:
    """Dense ``2**N x 2**N`` covariance ``N beta^2 q^2`` of ``-beta H_N``."""
    if N > 10:
        raise TooLarge(f"dense SK covariance limited to N <= 10, got {N}")
    S = kernels.spin_matrix(np.arange(1 << N), N)
    q = S @ S.T / N
    return N * beta**2 * q**2


@dataclass(frozen=True, eq=False)
class SkDisorder:
    N: int
    J: np.ndarray
    seed: int
    index: int = 0

    @classmethod
    def draw(cls, N: int, seed: int, index: int = 0) -> "SkDisorder":
        J = _rng.stream(seed, index, _rng.TAG_SK).standard_normal((N, N))
        J.setflags(write=False)
        return cls(N, J, seed, index)


def sk_hamiltonian_table(disorder: SkDisorder, subset: Sequence[int] | None = None) -> np.ndarray:
    """Energies of every configuration of the (sub)system.

    With ``subset`` the sum runs over ``i, j`` in the subset only and the
    prefactor is ``1/sqrt(len(subset))``; spins are ordered as in ``subset``.
    """
    idx = list(range(disorder.N)) if subset is None else list(subset)
    if len(idx) > MAX_TABLE_SPINS:
        raise TooLarge(f"table of 2**{len(idx)} configurations exceeds 2**{MAX_TABLE_SPINS}")
    if not idx:
        return np.zeros(1)
    K = disorder.J[np.ix_(idx, idx)] / math.sqrt(len(idx))
    return kernels.quadratic_energies(K)


def split_hamiltonian_table(disorder: SkDisorder, N1: int) -> np.ndarray:
    """Full-configuration table of ``H_{N1}(s) + H_{N2}(s)`` with cross terms erased."""
    N = disorder.N
    K = np.zeros((N, N))
    for block in (slice(0, N1), slice(N1, N)):
        size = block.stop - block.start
        if size:
            K[block, block] = disorder.J[block, block] / math.sqrt(size)
    return kernels.quadratic_energies(K)


def log_partition(energies: np.ndarray, beta: float) -> float:
    return float(kernels.logsumexp_rows(-beta * np.asarray(energies)[None, :])[0])


def map_draws(fn: Callable[[int], float], M: int, threads: int = 1) -> np.ndarray:
    """``[fn(0), ..., fn(M-1)]`` in index order, optionally on a thread pool."""
    if threads <= 1:
        return np.array([fn(d) for d in range(M)], dtype=np.float64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.fromiter(pool.map(fn, range(M)), dtype=np.float64, count=M)


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def quenched_alpha_sk(N: int, beta: float, M: int, seed: int, threads: int = 1) -> QuenchedEstimate:
    """``alpha_N = -E log Z_N`` by exact enumeration over ``M`` disorder draws."""
    _check_beta(beta)
    if N > MAX_TABLE_SPINS:
        raise TooLarge(f"N = {N} exceeds the enumeration guard {MAX_TABLE_SPINS}")

    def one(d: int) -> float:
        return -log_partition(sk_hamiltonian_table(SkDisorder.draw(N, seed, d)), beta)

    return QuenchedEstimate.from_values(map_draws(one, M, threads), seed)


@dataclass(frozen=True)
class MarginCheck:
    holds: bool
    worst_margin: float
    worst_pair: tuple[int, int]


def superpythagorean_margins(N1: int, N2: int, beta: float = 1.0) -> np.ndarray:
    """``d_N^2 - d_N1^2 - d_N2^2`` for every difference mask ``sigma XOR tau``.

    All three distances depend on a pair only through its difference mask, so
    this array covers every pair ``(sigma, tau)`` of the full system.
    """
    N = N1 + N2
    masks = np.arange(1 << N, dtype=np.uint64)
    h1 = np.bitwise_count(masks >> np.uint64(N2)).astype(np.float64)
    h2 = np.bitwise_count(masks & np.uint64((1 << N2) - 1)).astype(np.float64)
    h = h1 + h2

    def sq(hh, n):
        return 8.0 * beta**2 * hh * (n - hh) / n if n else 0.0

    return sq(h, N) - sq(h1, N1) - sq(h2, N2)


def check_superpythagorean_sk(N1: int, N2: int, beta: float = 1.0, tol: float = 1e-12) -> MarginCheck:
    _check_beta(beta)
    if N1 + N2 > MAX_SPLIT_SPINS:
        raise TooLarge(f"N1 + N2 = {N1 + N2} exceeds {MAX_SPLIT_SPINS}")
    margins = superpythagorean_margins(N1, N2, beta)
    k = int(np.argmin(margins))
    return MarginCheck(bool(margins[k] >= -tol), float(margins[k]), (0, k))


def split_factorization_gap(disorder: SkDisorder, N1: int, beta: float) -> float:
    """Relative gap between ``log sum e^{-beta(H1 + H2)}`` and ``log Z1 + log Z2``."""
    N = disorder.N
    lhs = log_partition(split_hamiltonian_table(disorder, N1), beta)
    rhs = (log_partition(sk_hamiltonian_table(disorder, range(N1)), beta)
           + log_partition(sk_hamiltonian_table(disorder, range(N1, N)), beta))
    return abs(lhs - rhs) / max(1.0, abs(rhs))


SUBADDITIVITY_COLUMNS = (
    "N", "N1", "N2", "beta", "M", "seed",
    "alpha_N", "alpha_N_stderr", "alpha_N1", "alpha_N2", "holds",
)


@dataclass(frozen=True)
class SkSubadditivityReport:
    N1: int
    N2: int
    beta: float
    M: int
    seed: int
    alpha_N: QuenchedEstimate
    alpha_N1: QuenchedEstimate
    alpha_N2: QuenchedEstimate
    holds: bool
    annealed_ok: bool

    @property
    def N(self) -> int:
        return self.N1 + self.N2

    def csv_row(self) -> list:
        return [self.N, self.N1, self.N2, self.beta, self.M, self.seed,
                self.alpha_N.mean, self.alpha_N.stderr,
                self.alpha_N1.mean, self.alpha_N2.mean, self.holds]


def _alpha_or_empty(n: int, beta: float, M: int, seed: int, threads: int) -> QuenchedEstimate:
    if n == 0:
        return QuenchedEstimate(0.0, 0.0, M, seed)
    return quenched_alpha_sk(n, beta, M, seed, threads)


def check_subadditivity_sk(N1: int, N2: int, beta: float, M: int, seed: int,
                           threads: int = 1) -> SkSubadditivityReport:
    """Estimate ``alpha_N``, ``alpha_N1``, ``alpha_N2`` with independent disorder.

    ``holds`` is ``alpha_N <= alpha_N1 + alpha_N2 + 3 sigma``; ``annealed_ok``
    checks the Jensen floor ``alpha_N / N >= -log 2 - beta^2/2 - 3 sigma / N``.
    """
    _check_beta(beta)
    N = N1 + N2
    if N > MAX_SPLIT_SPINS:
        raise TooLarge(f"N1 + N2 = {N} exceeds {MAX_SPLIT_SPINS}")
    a = quenched_alpha_sk(N, beta, M, _rng.derive_seed(seed, "sk-full", N), threads)
    a1 = _alpha_or_empty(N1, beta, M, _rng.derive_seed(seed, "sk-part1", N1), threads)
    a2 = _alpha_or_empty(N2, beta, M, _rng.derive_seed(seed, "sk-part2", N2), threads)
    sigma = combined_stderr(a, a1, a2)
    holds = a.mean <= a1.mean + a2.mean + SIGMA_LEVEL * sigma
    floor = -LOG2 - beta**2 / 2.0
    annealed_ok = a.mean / N >= floor - SIGMA_LEVEL * a.stderr / N
    return SkSubadditivityReport(N1, N2, beta, M, seed, a, a1, a2, bool(holds), bool(annealed_ok))
