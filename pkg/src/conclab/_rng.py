"""Seeded random streams.

A single master seed fans out to named, independent substreams so each phase
of an experiment (net build, median, isometry draws, validation) can be
reproduced on its own.
"""
from __future__ import annotations

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def seed_sequence(random_state=None) -> np.random.SeedSequence:
    """Coerce ``random_state`` (None, int, SeedSequence or Generator) to a SeedSequence."""
    if isinstance(random_state, np.random.SeedSequence):
        return random_state
    if isinstance(random_state, np.random.Generator):
        return np.random.SeedSequence(int(random_state.integers(0, 2**63)))
    if random_state is None or isinstance(random_state, (int, np.integer)):
        return np.random.SeedSequence(random_state)
    raise TypeError(f"cannot build a random stream from {random_state!r}")


def substream(random_state, name: str, *index: int) -> np.random.Generator:
    """Independent generator for phase ``name`` (and optional integer indices)."""
    parent = seed_sequence(random_state)
    key = tuple(parent.spawn_key) + (_name_key(name),) + tuple(int(i) for i in index)
    child = np.random.SeedSequence(parent.entropy, spawn_key=key)
    return np.random.Generator(np.random.PCG64(child))


def check_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.PCG64(seed_sequence(rng)))
