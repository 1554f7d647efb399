"""Seeded random streams.

Every random draw in the package comes from a numpy ``Generator`` backed by
the counter-based Philox bit generator. Streams are keyed by a 64-bit seed, a
purpose tag and optional integer coordinates, so two callers asking for the
same key always see the same numbers regardless of call order or process.
"""
from __future__ import annotations

import hashlib

import numpy as np

# Stable purpose ids; never renumber, stored results depend on them.
GRAPH_GEN = 1
WALKS = 2
INIT = 3
NEGATIVES = 4

_MASK64 = (1 << 64) - 1


def stream(seed: int, purpose: int, *coords: int) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, *coords)``."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(purpose, *map(int, coords)))
    return np.random.Generator(np.random.Philox(ss))


def stable_seed(*parts: object) -> int:
    """64-bit seed derived from the string form of ``parts`` via SHA-256."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
