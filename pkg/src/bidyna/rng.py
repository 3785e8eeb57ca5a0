"""Deterministic per-component random streams.

Every run is driven by a single 64-bit seed. The seed fans out into fixed,
named component streams (environment construction, environment stepping,
agent action noise) via PCG64 seeded through ``numpy.random.SeedSequence``
spawn keys. Because each consumer owns its stream, adding or removing one
consumer never shifts the randomness seen by another.
"""

from __future__ import annotations

import numpy as np

ENV_BUILD = 0
ENV_STEP = 1
AGENT = 2


def component_rng(seed: int, stream: int) -> np.random.Generator:
    """Generator for the given component stream of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def component_seed(seed: int, stream: int) -> int:
    """A derived 64-bit integer seed, for specs that take a seed field."""
    return int(np.random.SeedSequence(seed, spawn_key=(stream,)).generate_state(1, np.uint64)[0])
