"""Seed derivation.

Every random draw in the package comes from a Philox generator (counter based,
so independent streams are cheap to split).  Replicate ``i`` of a run with
master seed ``s`` always receives the same 64-bit seed, independently of how
many workers execute the run.
"""

from __future__ import annotations

import numpy as np

__all__ = ["replicate_seed", "replicate_seeds", "substream", "generator"]

_MASK64 = (1 << 64) - 1


def replicate_seed(master: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master) & _MASK64, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replicate_seeds(master: int, count: int) -> list[int]:
    seeds = [replicate_seed(master, i) for i in range(count)]
    if len(set(seeds)) != len(seeds):  # pragma: no cover - 64-bit collision
        raise RuntimeError("replicate seed collision; choose another master seed")
    return seeds


def substream(seed: int, *keys: int) -> int:
    """Seed of a named child stream, e.g. the bootstrap stream of a report."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & _MASK64))
