"""Seed derivation.

Every random stream is drawn from numpy's PCG64 (``numpy.random.default_rng``)
seeded with ``(base ^ PURPOSE[purpose]) + k`` modulo 2**64, where ``k`` is the
run index (0 for one-off streams such as a dataset).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

PURPOSE = {
    "init": 0x9E3779B97F4A7C15,
    "data": 0xBF58476D1CE4E5B9,
    "graph": 0x94D049BB133111EB,
    "model": 0xD6E8FEB86659FD93,
}


def derive_seed(base: int, purpose: str, k: int = 0) -> int:
    if purpose not in PURPOSE:
        raise KeyError(f"unknown seed purpose {purpose!r}; known: {sorted(PURPOSE)}")
    return ((int(base) ^ PURPOSE[purpose]) + int(k)) & MASK64


def rng_for(base: int, purpose: str, k: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, purpose, k))
