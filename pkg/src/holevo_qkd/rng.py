"""Seeded random streams.

Every consumer gets its own generator derived from one 64-bit master seed
and a fixed integer path, so results do not depend on evaluation order.
Stream paths used by the package:

    (0,)  per-step uniforms for the protocol engine (one row per step)
    (1,)  selection of tested steps
    (2, i)  Monte Carlo shots for letter ``i`` in the analyzer check
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def step_uniforms(seed: int, steps: int, slots: int) -> np.ndarray:
    """Row ``i`` holds step ``i``'s uniforms; it depends only on (seed, i)."""
    return derive_rng(seed, 0).random((steps, slots))
