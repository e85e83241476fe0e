"""Seeded, counter-based random streams.

Every stochastic routine takes an integer seed and derives independent
substreams from it, so a run is reproducible bit for bit.
"""
from __future__ import annotations

import numpy as np


def generator(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Philox generator keyed by ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def substreams(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` statistically independent generators spawned from ``seed``."""
    return [generator(s) for s in np.random.SeedSequence(seed).spawn(n)]


def as_generator(rng: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return generator(0 if rng is None else int(rng))
