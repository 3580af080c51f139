"""Time the numpy and numba kernels on desk-scale inputs.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is called once
to warm up (numba compiles on first call) and then timed as the best of a
few repeats. Results from the two backends are compared before timing.
"""
import argparse
import timeit

import numpy as np

from glassinterp import kernels
from glassinterp.grem_model import GremSpec, build_grem, grem_edge_draws


def tree_args(N: int):
    tree = build_grem(GremSpec.geometric(), N)
    draws = grem_edge_draws(tree, 1)
    live = [i for i, k in enumerate(tree.k) if k]
    eps = np.concatenate([draws[i] for i in live])
    offsets = np.cumsum([0] + [draws[i].size for i in live[:-1]])
    shifts = np.array([tree.total_spins - tree.level_offsets[i + 1] for i in live])
    return eps, offsets, shifts, np.sqrt(tree.total_spins), 1 << tree.total_spins


def cases(rng):
    D = np.cov(rng.standard_normal((6, 20)))
    return {
        "quadratic_energies (N=16)": ("quadratic_energies", (rng.standard_normal((16, 16)),)),
        "logsumexp_rows (1e5 x 6)": ("logsumexp_rows", (rng.standard_normal((100_000, 6)),)),
        "gibbs_trace_rows (1e5 x 6)": ("gibbs_trace_rows", (rng.standard_normal((100_000, 6)), D)),
        "tree_energies (N=22, |k|=19)": ("tree_energies", tree_args(22)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    if not kernels.NUMBA_KERNELS:
        print("numba not installed; timing the numpy kernels only")
    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for label, (name, a) in cases(rng).items():
        fn_np = kernels.NUMPY_KERNELS[name]
        fn_nb = kernels.NUMBA_KERNELS.get(name)
        ref = fn_np(*a)
        t_np = min(timeit.repeat(lambda: fn_np(*a), number=1, repeat=args.repeat)) * 1e3
        if fn_nb is None:
            print(f"{label:32s} {t_np:12.2f} {'-':>12s} {'-':>8s}")
            continue
        got = fn_nb(*a)  # compiles on first call
        assert np.allclose(ref, got, rtol=1e-12, atol=1e-10), f"{name}: backends disagree"
        t_nb = min(timeit.repeat(lambda: fn_nb(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:32s} {t_np:12.2f} {t_nb:12.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
