"""Acceptance suite: one test per criterion, each with its own runtime budget.

Every test records a ``PASS``/``FAIL`` line (with wall time) that is printed
in the pytest terminal summary under "acceptance criteria".
"""
import contextlib
import itertools
import math
import time

import numpy as np
import pytest
from scipy.stats import ortho_group

from glassinterp.alignment import RigidMotion, align_tolerance, recover_isometry, recover_rotation, residual
from glassinterp.grem_model import (
    GremSpec,
    GremTree,
    asymptotic_ratios,
    branching_vector,
    build_grem,
    check_distance_monotonicity,
    check_subadditivity_grem,
    grem_covariance,
    grem_distance,
    grem_quenched_alpha,
    leaf_config,
    pair_s2,
    split_grem,
)
from glassinterp.harness import ExperimentConfig, run_config
from glassinterp.interpolation import (
    check_classic_conditions,
    check_metric_conditions,
    combined_stderr,
    estimate_F,
    hessian_f,
    interpolation_rhs,
    simplex_G_nonneg,
    verify_inequality,
)
from glassinterp.sk_model import (
    LOG2,
    SkDisorder,
    SpinConfig,
    check_subadditivity_sk,
    sk_hamiltonian_table,
    split_factorization_gap,
    superpythagorean_margins,
)
from tests.helpers import ACCEPTANCE_LINES, random_covariance, random_factor_rows
from tests.oracles import fd_hessian, lse

GEO = GremSpec.geometric()


@contextlib.contextmanager
def criterion(number: int, title: str, budget_s: float | None):
    start = time.perf_counter()
    status = "FAIL"
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget_s is not None:
            assert elapsed < budget_s, f"runtime {elapsed:.1f}s exceeds budget {budget_s}s"
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - start
        limit = f" (budget {budget_s:g}s)" if budget_s is not None else ""
        line = f"[{status}] criterion {number:2d}: {title} - {elapsed:.2f}s{limit}"
        ACCEPTANCE_LINES.append(line)
        print(line)


def test_01_interpolation_identity():
    with criterion(1, "interpolation identity on 50 random pairs, n in 2..6", 120):
        rng = np.random.default_rng(1)
        worst = 0.0
        for trial in range(50):
            n = int(rng.integers(2, 7))
            Cx, Cy = random_covariance(rng, n), random_covariance(rng, n)
            w = rng.uniform(0.2, 3.0, n)
            rhs = interpolation_rhs(Cx, Cy, w, t_nodes=16, m=100_000, seed=3 * trial)
            fx = estimate_F(Cx, w, m=100_000, seed=3 * trial + 1)
            fy = estimate_F(Cy, w, m=100_000, seed=3 * trial + 2)
            z = abs(rhs.mean - (fy.mean - fx.mean)) / combined_stderr(rhs, fx, fy)
            worst = max(worst, z)
            assert z <= 3.0, f"trial {trial}: |RHS - LHS| = {z:.2f} sigma"


def test_02_simplex_condition():
    with criterion(2, "simplex closed form == brute force on 500 matrices", 10):
        rng = np.random.default_rng(2)
        outcomes = []
        for trial in range(500):
            n = int(rng.integers(2, 5))
            # a PSD-difference part keeps both outcomes common
            B = random_covariance(rng, n) - random_covariance(rng, n) * rng.uniform(0, 1.5)
            S = rng.standard_normal((n, n)) * 0.1
            D = B + S + S.T
            r = simplex_G_nonneg(D)
            assert r.closed_form == r.brute_force, f"trial {trial}: disagreement"
            outcomes.append(r.closed_form)
        assert 50 < sum(outcomes) < 450  # both branches exercised


def test_03_generalized_beats_classic():
    with criterion(3, "metric-only pair passes, classic conditions fail", 5):
        Cx = np.eye(2)
        Cy = np.array([[2.0, 0.5], [0.5, 2.0]])
        c = check_classic_conditions(Cx, Cy)
        assert not c.classic_diag_ok and not c.classic_offdiag_ok
        assert check_metric_conditions(Cx, Cy).metric_ok
        assert verify_inequality(Cx, Cy, m=100_000, seed=0).holds


def test_04_hessian_finite_differences():
    with criterion(4, "Hessian vs central differences on 100 points, n <= 6", None):
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(1, 7))
            x = rng.standard_normal(n) * 2
            w = rng.uniform(0.1, 5.0, n)
            err = np.max(np.abs(fd_hessian(lambda y: lse(y, w), x) - hessian_f(x, w)))
            worst = max(worst, err)
        assert worst <= 1e-6, worst


def test_05_sk_exact_checks():
    with criterion(5, "SK parity, Hamming split, factorization, super-Pythagorean, N <= 12", 60):
        for N in range(1, 13):
            for d in range(2):
                H = sk_hamiltonian_table(SkDisorder.draw(N, 500 + N, d))
                assert np.array_equal(H, H[::-1]), "gauge parity"
            masks = np.arange(1 << N, dtype=np.uint64)
            for N1 in range(1, N):
                N2 = N - N1
                # Hamming decomposition, in integers: h = h1 + h2 for every mask
                h = np.bitwise_count(masks)
                h1 = np.bitwise_count(masks >> np.uint64(N2))
                h2 = np.bitwise_count(masks & np.uint64((1 << N2) - 1))
                assert np.array_equal(h, h1 + h2)
                margin = superpythagorean_margins(N1, N2, 1.0)
                assert margin.min() >= -1e-12
                dis = SkDisorder.draw(N, 900 + N, N1)
                assert split_factorization_gap(dis, N1, 1.0) <= 1e-10


def test_06_sk_subadditivity():
    with criterion(6, "SK 8 = 4 + 4 subadditivity, beta -> 0 equality", 120):
        r = check_subadditivity_sk(4, 4, 1.0, 2000, 0)
        assert r.holds
        hot = check_subadditivity_sk(4, 4, 1e-6, 2000, 0)
        assert abs(hot.alpha_N.mean + 8 * LOG2) <= 1e-4
        assert abs(hot.alpha_N.mean - hot.alpha_N1.mean - hot.alpha_N2.mean) <= 1e-4


def test_07_grem_golden_values():
    with criterion(7, "GREM labelled leaves and coalescence distances", None):
        tree = GremTree.from_k((1, 2, 1), GEO)
        sigma = leaf_config(tree, (0, 1, 0))
        tau = leaf_config(tree, (0, 3, 1))
        assert sigma.spins() == (-1, -1, 1, -1)
        assert tau.spins() == (-1, 1, 1, 1)
        a2, a3 = GEO.variance(2), GEO.variance(3)
        assert (a2, a3) == (0.25, 0.125)
        s, _ = grem_distance(tree, GEO, sigma, tau)
        sub = GremTree.from_k((1, 1, 1), GEO)
        keep = [0, 2, 3]
        s_sub, _ = grem_distance(sub, GEO, sigma.restrict(keep), tau.restrict(keep))
        assert s == math.sqrt(2 * (a2 + a3))
        assert s_sub == math.sqrt(2 * a3)
        assert s_sub < s


def _structural_trees():
    trees = [build_grem(GEO, N) for N in range(1, 10)]
    trees += [GremTree.from_k(k, GEO) for k in [(1, 2, 1), (8,), (1,) * 8, (3, 0, 2), (2, 0, 0, 1)]]
    return [t for t in trees if t.total_spins <= 8]


def test_08_grem_structure():
    with criterion(8, "GREM ultrametric, covariance, labels, splits, monotone chains", 120):
        for tree in _structural_trees():
            K = tree.total_spins
            c = np.arange(1 << K)
            s2 = pair_s2(tree, c, c)
            d2 = K * s2
            # covariance/metric consistency (dyadic variances make this exact)
            Cov = np.array([[grem_covariance(tree, GEO, SpinConfig(int(a), K), SpinConfig(int(b), K))
                             for b in c] for a in c])
            assert np.array_equal(d2, np.diag(Cov)[:, None] + np.diag(Cov)[None, :] - 2 * Cov)
            # ultrametricity over all triples
            d = np.sqrt(d2)
            for r in range(1 << K):
                assert np.all(d <= np.maximum(d[:, [r]], d[[r], :]))
            # labelling bijection
            labels = {leaf_config(tree, ch).bits for ch in itertools.product(
                *[range(1 << k) for k in tree.k if k])}
            assert labels == set(range(1 << K))
        # lost >= 0 and per-level inequality, all N <= 64 and all splits
        for N in range(1, 65):
            k = branching_vector(GEO, N)
            for N1 in range(N + 1):
                k1, k2 = branching_vector(GEO, N1), branching_vector(GEO, N - N1)
                for i in range(len(k)):
                    a = (k1[i] if i < len(k1) else 0) + (k2[i] if i < len(k2) else 0)
                    assert a <= k[i] <= a + 1
                assert sum(k) - sum(k1) - sum(k2) >= 0
        # monotonicity along random single-label decrement chains from k(8) = (4, 2, 1)
        rng = np.random.default_rng(8)
        for _ in range(20):
            tree = build_grem(GEO, 8)
            while tree.total_spins:
                drop = int(rng.integers(tree.total_spins))
                keep = [i for i in range(tree.total_spins) if i != drop]
                k_new = list(tree.k)
                k_new[tree.level_of_spin[drop] - 1] -= 1
                sub = GremTree.from_k(k_new, GEO)
                r = check_distance_monotonicity(tree, sub, keep)
                assert r.holds, r
                tree = sub


def test_09_grem_subadditivity():
    with criterion(9, "GREM 8 = 4 + 4 corrected subadditivity, beta -> 0 counting", 180):
        r = check_subadditivity_grem(GEO, 8, 4, 4, 1.0, 2000, 0)
        assert r.holds and r.plain_holds
        sp = split_grem(GEO, 8, 4, 4)
        beta = 1e-12
        a = grem_quenched_alpha(sp.tree, GEO, beta, 5, 1)
        a1 = grem_quenched_alpha(sp.tree1, GEO, beta, 5, 2)
        a2 = grem_quenched_alpha(sp.tree2, GEO, beta, 5, 3)
        assert sp.tree.total_spins == sp.tree1.total_spins + sp.tree2.total_spins + sp.lost
        assert a.mean == pytest.approx(-7 * LOG2, abs=1e-9)
        assert a.mean == pytest.approx(a1.mean + a2.mean - sp.lost * LOG2, abs=1e-9)


def test_10_asymptotics():
    with criterion(10, "|k(N)|/N at powers of two, correction ratio decays", 10):
        rows = asymptotic_ratios(GEO, [2**m for m in range(1, 11)])
        for m, row in enumerate(rows, start=1):
            assert row.size_ratio == 1 - 2.0**-m
        r8 = next(r for r in rows if r.N == 8)
        r1024 = next(r for r in rows if r.N == 1024)
        assert r1024.sup_correction_ratio < r8.sup_correction_ratio


def test_11_alignment():
    with criterion(11, "200 generate-and-recover rigid motions incl. rank-deficient", 10):
        rng = np.random.default_rng(11)
        for trial in range(200):
            k = int(rng.integers(1, 7))
            n = int(rng.integers(1, 10))
            rank = int(rng.integers(1, k + 1)) if trial % 2 else k
            V = random_factor_rows(rng, n, k, rank)
            Q = ortho_group.rvs(k, random_state=trial) if k > 1 else np.array([[rng.choice([-1.0, 1.0])]])
            b = rng.standard_normal(k) * 3
            W = V @ Q.T + b
            m = recover_isometry(V, W)
            assert m.orthogonality_defect() <= 1e-10
            assert residual(V, W, m) <= 1e-8 * (1 + np.abs(W).max())
            assert residual(V, W, m) <= align_tolerance(W)
            O = recover_rotation(V, V @ Q.T)
            assert residual(V, V @ Q.T, RigidMotion(O, np.zeros(k))) <= 1e-8 * (1 + np.abs(V).max())


def test_12_determinism(tmp_path):
    with criterion(12, "reruns with the same config give byte-identical CSVs", None):
        configs = [
            {"model": "sk", "sizes": [2, 4, 8], "splits": [[4, 4]], "samples": 300, "seed": 12},
            {"model": "grem", "sizes": [4, 8], "splits": [[4, 4]], "samples": 300, "seed": 12},
            {"model": "abstract", "mc_samples": 5000, "seed": 12},
        ]
        for i, obj in enumerate(configs):
            cfg = ExperimentConfig.from_dict({**obj, "output": str(tmp_path / f"run{i}")})
            first = run_config(cfg)
            snap = {f: (tmp_path / f"run{i}" / f).read_bytes() for f in first.files}
            second = run_config(cfg)
            assert first.files == second.files
            for f in second.files:
                assert (tmp_path / f"run{i}" / f).read_bytes() == snap[f], f
