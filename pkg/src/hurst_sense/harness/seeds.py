"""Counter-based seed streams.

``seed_stream(root, i) = splitmix64(splitmix64(root) xor i)``. For a fixed root the map
``i -> seed`` is a bijection on 64-bit integers (xor with a constant, then a bijective
mixer), so distinct replication indices never share a seed. Only integer arithmetic
modulo 2**64 is involved, so streams are identical on every platform.
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1


def splitmix64(x):
    z = (int(x) + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def seed_stream(root, replication_index):
    """Seed of replication ``replication_index`` under ``root``."""
    if replication_index < 0:
        raise ValueError("replication index must be >= 0")
    return splitmix64(splitmix64(int(root) & MASK) ^ (int(replication_index) & MASK))


def seed_block(root, start, count):
    """Seeds for replications ``start .. start + count - 1`` (vectorized splitmix64)."""
    with np.errstate(over="ignore"):
        base = np.uint64(splitmix64(int(root) & MASK))
        z = np.arange(start, start + count, dtype=np.uint64) ^ base
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return [int(v) for v in z]
