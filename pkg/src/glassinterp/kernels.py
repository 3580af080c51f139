"""Hot inner loops, each in a pure-numpy and a numba flavour.

The public names at the bottom dispatch on :data:`glassinterp._backend.BACKEND`.
Both flavours are importable directly (``NUMPY_KERNELS`` / ``NUMBA_KERNELS``)
so the benchmark and the backend-agreement tests can call either one.

Configuration index convention used everywhere in the package: for a
configuration index ``c`` of ``n`` spins, spin ``i`` (0-based) is ``+1`` iff
bit ``n - 1 - i`` of ``c`` is set, i.e. the first spin is the most
significant bit.
"""
from __future__ import annotations

import numpy as np

from ._backend import BACKEND, NUMBA_AVAILABLE, njit

_CHUNK = 1 << 14


def spin_matrix(configs: np.ndarray, n: int) -> np.ndarray:
    """Rows of +-1 spins for the given configuration indices."""
    configs = np.asarray(configs, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (configs[:, None] >> shifts) & 1
    return (2 * bits - 1).astype(np.float64)


# ---------------------------------------------------------------- numpy path


def _np_quadratic_energies(K: np.ndarray) -> np.ndarray:
    # E(c) = -sum_ij K_ij s_i s_j, accumulated in a fixed elementwise order so
    # that E(c) == E(~c) bit for bit.
    K = np.ascontiguousarray(K, dtype=np.float64)
    n = K.shape[0]
    total = 1 << n
    out = np.empty(total)
    for start in range(0, total, _CHUNK):
        configs = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        S = spin_matrix(configs, n)
        field = np.zeros_like(S)
        for j in range(n):
            field += S[:, j : j + 1] * K[:, j]
        q = np.zeros(len(configs))
        for i in range(n):
            q += S[:, i] * field[:, i]
        out[start : start + len(configs)] = -q
    return out


def _np_logsumexp_rows(Y: np.ndarray) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    m = Y.max(axis=1)
    return m + np.log(np.exp(Y - m[:, None]).sum(axis=1))


def _np_gibbs_trace_rows(Y: np.ndarray, D: np.ndarray) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    m = Y.max(axis=1, keepdims=True)
    e = np.exp(Y - m)
    mu = e / e.sum(axis=1, keepdims=True)
    return mu @ np.diag(D) - ((mu @ D) * mu).sum(axis=1)


def _np_tree_energies(eps: np.ndarray, offsets: np.ndarray, shifts: np.ndarray,
                      scale: float, n_leaves: int) -> np.ndarray:
    leaves = np.arange(n_leaves, dtype=np.int64)
    acc = np.zeros(n_leaves)
    for off, sh in zip(offsets, shifts):
        acc += eps[off + (leaves >> sh)]
    return -scale * acc


# ---------------------------------------------------------------- numba path

if NUMBA_AVAILABLE:

    @njit
    def _nb_quadratic_energies(K):
        n = K.shape[0]
        total = 1 << n
        out = np.empty(total)
        s = np.empty(n)
        for c in range(total):
            for i in range(n):
                s[i] = 1.0 if (c >> (n - 1 - i)) & 1 else -1.0
            q = 0.0
            for i in range(n):
                f = 0.0
                for j in range(n):
                    f += s[j] * K[i, j]
                q += s[i] * f
            out[c] = -q
        return out

    @njit
    def _nb_logsumexp_rows(Y):
        rows, cols = Y.shape
        out = np.empty(rows)
        for r in range(rows):
            m = Y[r, 0]
            for c in range(1, cols):
                if Y[r, c] > m:
                    m = Y[r, c]
            s = 0.0
            for c in range(cols):
                s += np.exp(Y[r, c] - m)
            out[r] = m + np.log(s)
        return out

    @njit
    def _nb_gibbs_trace_rows(Y, D):
        rows, n = Y.shape
        out = np.empty(rows)
        mu = np.empty(n)
        for r in range(rows):
            m = Y[r, 0]
            for i in range(1, n):
                if Y[r, i] > m:
                    m = Y[r, i]
            s = 0.0
            for i in range(n):
                mu[i] = np.exp(Y[r, i] - m)
                s += mu[i]
            lin = 0.0
            quad = 0.0
            for i in range(n):
                mu[i] /= s
            for i in range(n):
                lin += D[i, i] * mu[i]
                row = 0.0
                for j in range(n):
                    row += D[i, j] * mu[j]
                quad += mu[i] * row
            out[r] = lin - quad
        return out

    @njit
    def _nb_tree_energies(eps, offsets, shifts, scale, n_leaves):
        out = np.empty(n_leaves)
        levels = offsets.shape[0]
        for leaf in range(n_leaves):
            acc = 0.0
            for i in range(levels):
                acc += eps[offsets[i] + (leaf >> shifts[i])]
            out[leaf] = -scale * acc
        return out


def _wrap_nb_quadratic(K):
    return _nb_quadratic_energies(np.ascontiguousarray(K, dtype=np.float64))


def _wrap_nb_logsumexp(Y):
    return _nb_logsumexp_rows(np.ascontiguousarray(np.atleast_2d(Y), dtype=np.float64))


def _wrap_nb_gibbs(Y, D):
    return _nb_gibbs_trace_rows(
        np.ascontiguousarray(np.atleast_2d(Y), dtype=np.float64),
        np.ascontiguousarray(D, dtype=np.float64),
    )


def _wrap_nb_tree(eps, offsets, shifts, scale, n_leaves):
    return _nb_tree_energies(
        np.ascontiguousarray(eps, dtype=np.float64),
        np.asarray(offsets, dtype=np.int64),
        np.asarray(shifts, dtype=np.int64),
        float(scale),
        int(n_leaves),
    )


NUMPY_KERNELS = {
    "quadratic_energies": _np_quadratic_energies,
    "logsumexp_rows": _np_logsumexp_rows,
    "gibbs_trace_rows": _np_gibbs_trace_rows,
    "tree_energies": _np_tree_energies,
}

NUMBA_KERNELS = (
    {
        "quadratic_energies": _wrap_nb_quadratic,
        "logsumexp_rows": _wrap_nb_logsumexp,
        "gibbs_trace_rows": _wrap_nb_gibbs,
        "tree_energies": _wrap_nb_tree,
    }
    if NUMBA_AVAILABLE
    else {}
)

_ACTIVE = NUMBA_KERNELS if BACKEND == "numba" else NUMPY_KERNELS

quadratic_energies = _ACTIVE["quadratic_energies"]
"""Table of ``-sum_ij K_ij s_i s_j`` over all ``2**n`` configurations."""

logsumexp_rows = _ACTIVE["logsumexp_rows"]
"""Row-wise max-shifted ``log sum exp``."""

gibbs_trace_rows = _ACTIVE["gibbs_trace_rows"]
"""Row-wise ``Tr(D diag(mu) - D mu mu^T)`` with ``mu`` the softmax of the row."""

tree_energies = _ACTIVE["tree_energies"]
"""Leaf energies ``-scale * sum_i eps[offsets[i] + (leaf >> shifts[i])]``."""
