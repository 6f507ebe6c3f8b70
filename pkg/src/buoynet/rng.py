"""Deterministic RNG substreams.

Every stochastic consumer (a node's transmit jitter, its radio shadowing)
gets its own stream derived from the scenario seed and a scope key, so
adding or removing one node never perturbs the draws of another.
"""

from __future__ import annotations

import hashlib
import random


def substream(seed: int, *scope: object) -> random.Random:
    """A `random.Random` seeded from a stable hash of (seed, *scope)."""
    material = hashlib.sha256(repr((seed, *scope)).encode("utf-8")).digest()
    return random.Random(int.from_bytes(material[:8], "big"))
