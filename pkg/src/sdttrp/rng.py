"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator seeded via
``SeedSequence``; independent child streams come from ``SeedSequence.spawn``,
so every route (or search run) gets its own reproducible stream regardless
of how many numbers earlier consumers drew.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


class RouteStreams:
    """Hands out one child generator per call, in a fixed order."""

    def __init__(self, seed: int):
        self._root = np.random.SeedSequence(seed)

    def next(self) -> np.random.Generator:
        (child,) = self._root.spawn(1)
        return np.random.Generator(np.random.PCG64(child))


def derive_seed(seed: int, *keys: int) -> int:
    """A fresh 63-bit seed determined by ``seed`` and the integer ``keys``."""
    if not keys:
        return seed
    state = np.random.SeedSequence([seed, *keys]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])
