"""Seed-stream plumbing shared by samplers, engines and experiments.

Every random quantity in the package descends from a single integer master
seed through ``numpy.random.SeedSequence`` spawn keys, so a run is fully
reproducible from (parameters, master seed, engine version).  Batch kernels
compiled with numba cannot hold a Generator, so they get 32-bit seed words
derived through the same mechanism.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the labeled sub-stream ``key`` of ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def seed_words(master_seed: int, *key: int, n: int = 1) -> np.ndarray:
    """``n`` uint32 words for seeding compiled kernels, one per chunk."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return ss.generate_state(n, dtype=np.uint32)


def as_rng(seed_or_rng) -> np.random.Generator:
    """Accept either a Generator or anything default_rng understands."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
