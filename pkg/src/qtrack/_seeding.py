"""Deterministic seed derivation shared by every stochastic component."""

from __future__ import annotations

import numpy as np


def derive_seed(master: int, *keys: int) -> int:
    """Return a 32-bit seed derived from ``master`` and an index path.

    The result depends only on the arguments, never on call order, so jobs
    can run in any schedule and still reproduce.
    """
    entropy = [int(master) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)[0])


def rng_for(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
