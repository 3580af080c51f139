"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, tag)`` with the high
counter word set to ``index``, so stream ``(seed, tag, index)`` never depends
on how many other streams were drawn or in what order.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1

# stream tags; one per consumer so equal seeds never collide across models
TAG_GAUSS = 1
TAG_SK = 2
TAG_GREM = 3


def stream(seed: int, index: int, tag: int = 0) -> np.random.Generator:
    key = np.array([seed & _MASK64, tag & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, 0, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def derive_seed(master: int, name: str, index: int = 0) -> int:
    """Fixed hash of ``(master, name, index)`` to a 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master & _MASK64).to_bytes(8, "little"))
    h.update(name.encode())
    h.update(int(index).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")
