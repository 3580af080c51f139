"""Kernel backend selection.

Set ``GLASSINTERP_BACKEND=numpy`` to force the pure-numpy kernels. Any other
value (or leaving it unset) uses numba when it can be imported.
"""
from __future__ import annotations

import os

_requested = os.environ.get("GLASSINTERP_BACKEND", "numba").strip().lower()

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is an optional extra
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and _requested != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op when numba is missing."""
    if not NUMBA_AVAILABLE:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    from numba import njit as _njit

    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return _njit(*args, **kwargs)
