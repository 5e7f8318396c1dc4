"""Counter-based random streams.

Trial t of a run with master seed s always draws from the Philox stream keyed
by s with counter t in its high word, so a sample never depends on which
thread produced it or on how many trials ran before it.
"""

from __future__ import annotations

import zlib
from typing import Any

import numpy as np

SEED_LIMIT = 2**64


def trial_generator(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(master_seed), counter=[0, 0, 0, int(trial)]))


def as_generator(seed: Any = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.Generator(np.random.Philox())
    return trial_generator(int(seed), 0)


def label_key(label: str) -> int:
    return zlib.crc32(label.encode('utf-8'))


def derive_seed(master_seed: int, *keys: int | str) -> int:
    """64-bit child seed of ``master_seed`` for the given spawn keys."""
    spawn_key = tuple(label_key(k) if isinstance(k, str) else int(k) for k in keys)
    state = np.random.SeedSequence(int(master_seed), spawn_key=spawn_key).generate_state(1, dtype=np.uint64)
    return int(state[0])
