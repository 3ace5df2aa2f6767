"""Deterministic, splittable random streams.

Every run derives all of its randomness from a single 64-bit root seed.
Child streams are obtained with ``numpy.random.SeedSequence(root,
spawn_key=key)``, which hashes the root entropy together with the stream
key, and drive a counter-based Philox generator.  Because a child stream
depends only on ``(root, key)`` and never on how many values other
streams consumed, trials can run in any order (or in parallel) and still
reproduce bit-identical results.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "derive_seed"]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under the given root seed."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    seq = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *key: int) -> int:
    """Hash a root seed and stream key into an independent 64-bit child seed."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    seq = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0])
