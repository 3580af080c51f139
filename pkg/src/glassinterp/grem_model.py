"""Generalized random energy model with infinitely many levels.

At size ``N`` the tree has ``k_i(N) = floor(N gamma_i)`` spins on level ``i``;
every edge from level ``i - 1`` to level ``i`` carries an independent
``N(0, a_i)`` variable and a leaf's energy is ``-sqrt(|k|)`` times the sum
along its root path. Levels with ``k_i = 0`` have no edges and contribute
nothing (``a~_i = 0``).

Leaf labelling: the edges leaving a node on level ``i - 1`` are numbered
``0 .. 2**k_i - 1`` from left to right, and the binary digits of that number
(most significant first, ``0 -> -1``, ``1 -> +1``) are the spins of level ``i``.
With the package-wide convention that the first spin is the most significant
bit of a configuration index, the leaf index read left to right *is* the
configuration index.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _rng, kernels
from .errors import ConfigInvalid, PathInvalid, SpecInvalid, SplitInvalid, TooLarge
from .interpolation import SIGMA_LEVEL, QuenchedEstimate, combined_stderr
from .sk_model import LOG2, SpinConfig, log_partition, map_draws

MAX_TABLE_SPINS = 20
MAX_PAIR_SPINS = 10
MAX_SPLIT_SPINS = 14

TAILS = ("geometric", "none")


@dataclass(frozen=True)
class GremSpec:
    """Level fractions ``gamma_i = log(alpha_i) / log 2`` and variances ``a_i``.

    Each sequence is a finite prefix plus a tail. ``tail="geometric"`` spreads
    the remaining mass ``R = 1 - sum(prefix)`` as ``R/2, R/4, ...`` after the
    prefix; ``tail="none"`` ends the sequence at the prefix.
    """

    gammas: tuple[float, ...]
    variances: tuple[float, ...]
    tail: str = "geometric"

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "variances", tuple(float(a) for a in self.variances))
        if self.tail not in TAILS:
            raise SpecInvalid(f"tail must be one of {TAILS}, got {self.tail!r}")
        for name, seq in (("gammas", self.gammas), ("variances", self.variances)):
            if not seq:
                raise SpecInvalid(f"{name} prefix is empty")
            if any(not (x > 0) or not math.isfinite(x) for x in seq):
                raise SpecInvalid(f"{name} must be strictly positive on the prefix")
            partial = np.cumsum(seq)
            if partial[-1] > 1 + 1e-12:
                raise SpecInvalid(f"partial sums of {name} exceed 1 ({partial[-1]!r})")
            if self.tail == "geometric":
                rest = 1.0 - float(partial[-1])
                if rest <= 0:
                    raise SpecInvalid(f"geometric tail of {name} needs prefix sum < 1")
                if rest / 2 > seq[-1]:
                    raise SpecInvalid(f"tail of {name} is not monotone after the prefix")

    @classmethod
    def geometric(cls) -> "GremSpec":
        """``gamma_i = a_i = 2**-i``."""
        return cls((0.5,), (0.5,), "geometric")

    def _term(self, seq: tuple[float, ...], i: int) -> float:
        if i < 1:
            raise IndexError(i)
        if i <= len(seq):
            return seq[i - 1]
        if self.tail == "none":
            return 0.0
        rest = 1.0 - sum(seq)
        return rest * 0.5 ** (i - len(seq))

    def gamma(self, i: int) -> float:
        return self._term(self.gammas, i)

    def variance(self, i: int) -> float:
        return self._term(self.variances, i)

    def to_json(self) -> str:
        return json.dumps({"gammas": list(self.gammas), "variances": list(self.variances),
                           "tail": self.tail})

    @classmethod
    def from_json(cls, text: str) -> "GremSpec":
        try:
            obj = json.loads(text)
            return cls(tuple(obj["gammas"]), tuple(obj["variances"]), obj.get("tail", "geometric"))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise SpecInvalid(f"malformed GREM spec: {exc}") from exc

    @classmethod
    def from_dict(cls, obj: dict) -> "GremSpec":
        return cls.from_json(json.dumps(obj))

    @classmethod
    def load(cls, path) -> "GremSpec":
        return cls.from_json(Path(path).read_text())


@lru_cache(maxsize=65536)
def branching_vector(spec: GremSpec, N: int) -> tuple[int, ...]:
    """``(k_1(N), ..., k_n(N))`` with trailing zeros dropped."""
    if N < 0:
        raise SpecInvalid(f"N must be non-negative, got {N}")
    k = [math.floor(N * g) for g in spec.gammas]
    if spec.tail == "geometric":
        i = len(spec.gammas) + 1
        while N * spec.gamma(i) >= 1.0:
            k.append(math.floor(N * spec.gamma(i)))
            i += 1
    while k and k[-1] == 0:
        k.pop()
    return tuple(k)


@dataclass(frozen=True)
class GremTree:
    k: tuple[int, ...]
    atilde: tuple[float, ...]
    N: int | None = None

    def __post_init__(self):
        if any(x < 0 for x in self.k):
            raise SpecInvalid("branching exponents must be non-negative")
        if len(self.atilde) != len(self.k):
            raise SpecInvalid("one variance per level required")

    @classmethod
    def from_k(cls, k: Sequence[int], spec: GremSpec, N: int | None = None) -> "GremTree":
        k = list(k)
        while k and k[-1] == 0:
            k.pop()
        at = tuple(spec.variance(i + 1) if k[i] > 0 else 0.0 for i in range(len(k)))
        return cls(tuple(k), at, N)

    @property
    def n_levels(self) -> int:
        return len(self.k)

    @property
    def total_spins(self) -> int:
        return sum(self.k)

    @cached_property
    def level_offsets(self) -> tuple[int, ...]:
        """Spins of level ``i`` (1-based) are ``level_offsets[i-1] .. level_offsets[i]-1``."""
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.k, dtype=np.int64)]))

    @cached_property
    def level_of_spin(self) -> np.ndarray:
        """1-based level owning each (0-based) spin."""
        return np.repeat(np.arange(1, self.n_levels + 1), self.k).astype(np.int64)

    @cached_property
    def tail_sums(self) -> np.ndarray:
        """``tail_sums[l] = sum_{i > l} a~_i`` for ``l = 0 .. n``, non-increasing exactly."""
        out = np.zeros(self.n_levels + 1)
        for l in range(self.n_levels - 1, -1, -1):
            out[l] = out[l + 1] + self.atilde[l]
        return out

    @cached_property
    def head_sums(self) -> np.ndarray:
        """``head_sums[l] = sum_{i <= l} a~_i``."""
        out = np.zeros(self.n_levels + 1)
        for l in range(self.n_levels):
            out[l + 1] = out[l] + self.atilde[l]
        return out

    def _check(self, sigma: SpinConfig) -> None:
        if sigma.n != self.total_spins:
            raise ConfigInvalid(f"configuration has {sigma.n} spins, tree has {self.total_spins}")


def build_grem(spec: GremSpec, N: int) -> GremTree:
    if N < 1:
        raise SpecInvalid(f"N must be >= 1, got {N}")
    return GremTree.from_k(branching_vector(spec, N), spec, N)


def _empty_tree() -> GremTree:
    return GremTree((), (), 0)


@dataclass(frozen=True)
class LeafPath:
    """Left-to-right edge index chosen on each non-empty level, root first."""

    branch_choices: tuple[int, ...]


def leaf_config(tree: GremTree, path: LeafPath | Sequence[int]) -> SpinConfig:
    choices = tuple(path.branch_choices if isinstance(path, LeafPath) else path)
    levels = [i for i, ki in enumerate(tree.k) if ki > 0]
    if len(choices) != len(levels):
        raise PathInvalid(f"expected {len(levels)} branch choices, got {len(choices)}")
    K = tree.total_spins
    bits = 0
    for c, i in zip(choices, levels):
        if not 0 <= c < (1 << tree.k[i]):
            raise PathInvalid(f"choice {c} out of range for level {i + 1} (k = {tree.k[i]})")
        bits |= c << (K - tree.level_offsets[i + 1])
    return SpinConfig(bits, K)


def leaf_path(tree: GremTree, sigma: SpinConfig) -> LeafPath:
    tree._check(sigma)
    K = tree.total_spins
    out = []
    for i, ki in enumerate(tree.k):
        if ki:
            out.append((sigma.bits >> (K - tree.level_offsets[i + 1])) & ((1 << ki) - 1))
    return LeafPath(tuple(out))


def merge_level(tree: GremTree, sigma: SpinConfig, tau: SpinConfig) -> int:
    """Deepest level down to which the two root paths coincide (``n`` iff equal)."""
    tree._check(sigma)
    tree._check(tau)
    diff = sigma.bits ^ tau.bits
    if diff == 0:
        return tree.n_levels
    first_spin = tree.total_spins - diff.bit_length()
    return int(tree.level_of_spin[first_spin]) - 1


def grem_distance(tree: GremTree, spec: GremSpec | None, sigma: SpinConfig,
                  tau: SpinConfig) -> tuple[float, float]:
    """``(s, d)`` with ``s = sqrt(2 sum_{i > l} a~_i)`` and ``d = sqrt(|k|) s``.

    ``spec`` is accepted for symmetry with the other tree functions; the
    tree already carries the restricted variances.
    """
    l = merge_level(tree, sigma, tau)
    s = math.sqrt(2.0 * tree.tail_sums[l])
    return s, math.sqrt(tree.total_spins) * s


def grem_covariance(tree: GremTree, spec: GremSpec | None, sigma: SpinConfig, tau: SpinConfig) -> float:
    l = merge_level(tree, sigma, tau)
    return tree.total_spins * float(tree.head_sums[l])


def _first_diff_levels(tree: GremTree, xor: np.ndarray) -> np.ndarray:
    """Merge level for arrays of XOR masks (``n`` where the mask is zero)."""
    xor = np.asarray(xor, dtype=np.int64)
    _, exp = np.frexp(xor.astype(np.float64))  # bit_length for positive ints
    lv = np.concatenate([tree.level_of_spin, [tree.n_levels + 1]])
    first_spin = np.where(xor > 0, tree.total_spins - exp, tree.total_spins)
    return lv[first_spin] - 1


def pair_s2(tree: GremTree, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``s^2`` for all pairs of configuration indices ``a[:, None]``, ``b[None, :]``."""
    if tree.total_spins == 0:
        return np.zeros((len(a), len(b)))
    l = _first_diff_levels(tree, np.bitwise_xor.outer(np.asarray(a), np.asarray(b)))
    return 2.0 * tree.tail_sums[l]


def restrict_indices(configs: np.ndarray, n_spins: int, keep: Sequence[int]) -> np.ndarray:
    """Vectorised :meth:`SpinConfig.restrict` over configuration indices."""
    configs = np.asarray(configs, dtype=np.int64)
    out = np.zeros_like(configs)
    width = len(keep)
    for t, g in enumerate(keep):
        out |= ((configs >> (n_spins - 1 - g)) & 1) << (width - 1 - t)
    return out


def grem_edge_draws(tree: GremTree, seed: int, index: int = 0) -> list[np.ndarray]:
    """One array per level: the edge variables into that level, node-major.

    Empty levels get an empty array. Level ``i`` has ``2**(k_1 + ... + k_i)``
    edges with variance ``a~_i``.
    """
    rng = _rng.stream(seed, index, _rng.TAG_GREM)
    out = []
    for i, ki in enumerate(tree.k):
        if ki == 0:
            out.append(np.zeros(0))
            continue
        nodes = 1 << tree.level_offsets[i + 1]
        out.append(math.sqrt(tree.atilde[i]) * rng.standard_normal(nodes))
    return out


def edge_index(tree: GremTree, level: int, config: int) -> int:
    """Index into ``grem_edge_draws(...)[level - 1]`` of the edge on ``config``'s path."""
    return config >> (tree.total_spins - tree.level_offsets[level])


def grem_sample_energies(tree: GremTree, spec: GremSpec | None, seed: int, index: int = 0) -> np.ndarray:
    """Energies of all ``2**|k|`` leaves for disorder draw ``(seed, index)``."""
    K = tree.total_spins
    if K > MAX_TABLE_SPINS:
        raise TooLarge(f"|k| = {K} exceeds the enumeration guard {MAX_TABLE_SPINS}")
    if K == 0:
        return np.zeros(1)
    draws = grem_edge_draws(tree, seed, index)
    live = [i for i, ki in enumerate(tree.k) if ki]
    eps = np.concatenate([draws[i] for i in live])
    offsets = np.cumsum([0] + [draws[i].size for i in live[:-1]])
    shifts = [K - tree.level_offsets[i + 1] for i in live]
    return kernels.tree_energies(eps, np.asarray(offsets), np.asarray(shifts), math.sqrt(K), 1 << K)


@dataclass(frozen=True)
class GremSplit:
    tree: GremTree
    tree1: GremTree
    tree2: GremTree
    lost: int
    label_map: tuple[tuple[int, ...], tuple[int, ...]]


def split_grem(spec: GremSpec, N: int, N1: int, N2: int) -> GremSplit:
    """Trees for ``N``, ``N1``, ``N2`` with the subsystem spin assignment.

    On level ``i`` subsystem 1 keeps the first ``k_i(N1)`` spins of the full
    tree's level range and subsystem 2 the next ``k_i(N2)``; the rest are lost.
    """
    if N1 < 0 or N2 < 0 or N1 + N2 != N:
        raise SplitInvalid(f"need N1 + N2 = N with N1, N2 >= 0, got {N1} + {N2} != {N}")
    tree = build_grem(spec, N)

    def sub(n):
        return build_grem(spec, n) if n > 0 else _empty_tree()

    t1, t2 = sub(N1), sub(N2)
    keep1: list[int] = []
    keep2: list[int] = []
    for i, ki in enumerate(tree.k):
        k1 = t1.k[i] if i < t1.n_levels else 0
        k2 = t2.k[i] if i < t2.n_levels else 0
        if k1 + k2 > ki:
            raise SplitInvalid(f"level {i + 1}: k(N1) + k(N2) = {k1 + k2} > k(N) = {ki}")
        base = tree.level_offsets[i]
        keep1.extend(range(base, base + k1))
        keep2.extend(range(base + k1, base + k1 + k2))
    for t in (t1, t2):
        if t.n_levels > tree.n_levels:
            raise SplitInvalid("subsystem tree deeper than the full tree")
    lost = tree.total_spins - t1.total_spins - t2.total_spins
    return GremSplit(tree, t1, t2, lost, (tuple(keep1), tuple(keep2)))


def _check_label_map(tree: GremTree, subtree: GremTree, keep: Sequence[int]) -> None:
    if subtree.n_levels > tree.n_levels:
        raise ConfigInvalid("subtree has more levels than the tree")
    if len(keep) != subtree.total_spins:
        raise ConfigInvalid("label map size differs from the subtree's spin count")
    pos = 0
    for i, ki in enumerate(subtree.k):
        if ki > tree.k[i]:
            raise ConfigInvalid(f"level {i + 1}: k'_i = {ki} > k_i = {tree.k[i]}")
        lo, hi = tree.level_offsets[i], tree.level_offsets[i + 1]
        block = keep[pos : pos + ki]
        if any(not lo <= g < hi for g in block) or len(set(block)) != ki:
            raise ConfigInvalid(f"level {i + 1}: labels {block} not distinct labels of that level")
        pos += ki


@dataclass(frozen=True)
class PairScan:
    holds: bool
    worst_margin: float
    worst_pair: tuple[int, int]
    max_holds: bool = True
    worst_max_margin: float = 0.0


def check_distance_monotonicity(tree: GremTree, subtree: GremTree, label_map: Sequence[int],
                                spec: GremSpec | None = None, tol: float = 0.0) -> PairScan:
    """``s_{k'}(sigma, tau) <= s_k(sigma, tau)`` over every leaf pair of ``tree``."""
    K = tree.total_spins
    if K > MAX_PAIR_SPINS:
        raise TooLarge(f"|k| = {K} exceeds the pair-scan guard {MAX_PAIR_SPINS}")
    _check_label_map(tree, subtree, label_map)
    c = np.arange(1 << K)
    big = pair_s2(tree, c, c)
    r = restrict_indices(c, K, label_map)
    small = pair_s2(subtree, r, r)
    margin = big - small
    i, j = np.unravel_index(np.argmin(margin), margin.shape)
    return PairScan(bool(margin[i, j] >= -tol), float(margin[i, j]), (int(i), int(j)))


def check_superpythagorean_grem(spec: GremSpec, N: int, N1: int, N2: int, tol: float = 1e-12) -> PairScan:
    """``d_N^2 >= d_N1^2 + d_N2^2`` and ``s_N >= max(s_N1, s_N2)`` for all pairs."""
    sp = split_grem(spec, N, N1, N2)
    K = sp.tree.total_spins
    if K > MAX_PAIR_SPINS:
        raise TooLarge(f"|k(N)| = {K} exceeds the pair-scan guard {MAX_PAIR_SPINS}")
    c = np.arange(1 << K)
    s2 = pair_s2(sp.tree, c, c)
    parts = []
    for t, keep in zip((sp.tree1, sp.tree2), sp.label_map):
        r = restrict_indices(c, K, keep)
        parts.append(pair_s2(t, r, r))
    margin = K * s2 - sp.tree1.total_spins * parts[0] - sp.tree2.total_spins * parts[1]
    max_margin = s2 - np.maximum(parts[0], parts[1])
    i, j = np.unravel_index(np.argmin(margin), margin.shape)
    return PairScan(bool(margin[i, j] >= -tol), float(margin[i, j]), (int(i), int(j)),
                    bool(max_margin.min() >= -tol), float(max_margin.min()))


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def grem_quenched_alpha(tree: GremTree, spec: GremSpec | None, beta: float, M: int, seed: int,
                        threads: int = 1) -> QuenchedEstimate:
    """``alpha_N = -E log Z_N`` over ``M`` disorder draws of the tree."""
    _check_beta(beta)
    if tree.total_spins > MAX_TABLE_SPINS:
        raise TooLarge(f"|k| = {tree.total_spins} exceeds {MAX_TABLE_SPINS}")

    def one(d: int) -> float:
        return -log_partition(grem_sample_energies(tree, spec, seed, d), beta)

    return QuenchedEstimate.from_values(map_draws(one, M, threads), seed)


def jensen_ceiling(tree: GremTree, beta: float) -> float:
    """Upper bound ``log 2 + beta^2 sum(a~) / 2`` on ``E log Z / |k|``."""
    return LOG2 + beta**2 * float(sum(tree.atilde)) / 2.0


def split_factorization_gap(split: GremSplit, beta: float, seed: int, index: int = 0) -> float:
    """Relative gap in ``sum_s e^{-beta(H1 + H2)} = Z1 Z2 2^lost`` for one draw."""
    K = split.tree.total_spins
    if K > MAX_TABLE_SPINS:
        raise TooLarge(f"|k(N)| = {K} exceeds {MAX_TABLE_SPINS}")
    e1 = grem_sample_energies(split.tree1, None, _rng.derive_seed(seed, "fact-1"), index)
    e2 = grem_sample_energies(split.tree2, None, _rng.derive_seed(seed, "fact-2"), index)
    c = np.arange(1 << K)
    r1 = restrict_indices(c, K, split.label_map[0])
    r2 = restrict_indices(c, K, split.label_map[1])
    lhs = log_partition(e1[r1] + e2[r2], beta)
    rhs = log_partition(e1, beta) + log_partition(e2, beta) + split.lost * LOG2
    return abs(lhs - rhs) / max(1.0, abs(rhs))


SUBADDITIVITY_COLUMNS = (
    "N", "N1", "N2", "beta", "M", "seed", "k_total", "lost",
    "alpha_N", "alpha_N1", "alpha_N2",
    "alpha_N_stderr", "alpha_N1_stderr", "alpha_N2_stderr", "holds",
)


@dataclass(frozen=True)
class GremSubadditivityReport:
    N: int
    N1: int
    N2: int
    beta: float
    M: int
    seed: int
    k_total: int
    lost: int
    alpha_N: QuenchedEstimate
    alpha_N1: QuenchedEstimate
    alpha_N2: QuenchedEstimate
    holds: bool
    plain_holds: bool

    def csv_row(self) -> list:
        return [self.N, self.N1, self.N2, self.beta, self.M, self.seed, self.k_total, self.lost,
                self.alpha_N.mean, self.alpha_N1.mean, self.alpha_N2.mean,
                self.alpha_N.stderr, self.alpha_N1.stderr, self.alpha_N2.stderr, self.holds]


def check_subadditivity_grem(spec: GremSpec, N: int, N1: int, N2: int, beta: float, M: int,
                             seed: int, threads: int = 1) -> GremSubadditivityReport:
    """``alpha_N <= alpha_N1 + alpha_N2 - lost log 2`` within 3 combined stderr."""
    _check_beta(beta)
    sp = split_grem(spec, N, N1, N2)
    if sp.tree.total_spins > MAX_SPLIT_SPINS:
        raise TooLarge(f"|k(N)| = {sp.tree.total_spins} exceeds {MAX_SPLIT_SPINS}")
    a = grem_quenched_alpha(sp.tree, spec, beta, M, _rng.derive_seed(seed, "grem-full", N), threads)
    a1 = grem_quenched_alpha(sp.tree1, spec, beta, M, _rng.derive_seed(seed, "grem-part1", N1), threads)
    a2 = grem_quenched_alpha(sp.tree2, spec, beta, M, _rng.derive_seed(seed, "grem-part2", N2), threads)
    slack = SIGMA_LEVEL * combined_stderr(a, a1, a2)
    rhs = a1.mean + a2.mean
    holds = a.mean <= rhs - sp.lost * LOG2 + slack
    plain = a.mean <= rhs + slack
    return GremSubadditivityReport(N, N1, N2, beta, M, seed, sp.tree.total_spins, sp.lost,
                                   a, a1, a2, bool(holds), bool(plain))


ASYMPTOTIC_COLUMNS = ("N", "k_total", "size_ratio", "sup_correction_ratio", "argmax_N1")


@dataclass(frozen=True)
class AsymptoticRow:
    N: int
    k_total: int
    size_ratio: float
    sup_correction_ratio: float
    argmax_N1: int

    def csv_row(self) -> list:
        return [self.N, self.k_total, self.size_ratio, self.sup_correction_ratio, self.argmax_N1]


def split_loss(spec: GremSpec, N: int, N1: int) -> int:
    k, k1, k2 = (sum(branching_vector(spec, n)) for n in (N, N1, N - N1))
    return k - k1 - k2


def asymptotic_ratios(spec: GremSpec, N_list: Sequence[int]) -> list[AsymptoticRow]:
    """``|k(N)| / N`` and ``sup_{N1 + N2 = N} lost / |k(N)|`` for each ``N``.

    A tree with no spins reports a correction ratio of 0.
    """
    rows = []
    prev = -1
    for N in N_list:
        if N <= prev:
            raise SpecInvalid("N_list must be strictly ascending")
        prev = N
        kt = sum(branching_vector(spec, N))
        losses = [split_loss(spec, N, n1) for n1 in range(N + 1)]
        best = int(np.argmax(losses))
        sup = losses[best] / kt if kt else 0.0
        rows.append(AsymptoticRow(N, kt, kt / N, sup, best))
    return rows
