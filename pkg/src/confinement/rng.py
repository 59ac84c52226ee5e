"""Counter-based random streams with per-trial substreams.

Philox is counter-based, so trial substreams keyed by (seed, trial_index)
are independent of worker count and of the order trials are dispatched in.
"""
from __future__ import annotations

import numpy as np

__all__ = ["trial_generator", "spawn_generator"]


def trial_generator(seed: int, trial_index: int) -> np.random.Generator:
    """Generator for one trial, derived from (seed, trial_index)."""
    ss = np.random.SeedSequence((int(seed), int(trial_index)))
    return np.random.Generator(np.random.Philox(ss))


def spawn_generator(seed: int, *key: int) -> np.random.Generator:
    """Generator keyed by (seed, *key), for non-trial randomness (e.g. burst layouts)."""
    ss = np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
