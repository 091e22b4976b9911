"""Deterministic sub-seed derivation.

All randomness in an experiment flows from one master seed through named
streams so every stage can be re-run in isolation with identical results.
"""

from __future__ import annotations

import zlib

import numpy as np

# Stage names with reserved streams.
STREAMS = ("zoo", "split", "queries", "meta", "attack", "data")


def sub_seed(master_seed: int, stream: str, index: int = 0) -> int:
    """Derive a 32-bit seed for a named stream.

    crc32 keeps the mapping stable across platforms and Python hash seeds.
    """
    tag = zlib.crc32(stream.encode("utf-8"))
    mixed = np.random.SeedSequence([master_seed, tag, index]).generate_state(1)[0]
    return int(mixed)


def rng_for(master_seed: int, stream: str, index: int = 0) -> np.random.Generator:
    """Generator seeded from (master, stream, index)."""
    return np.random.default_rng(sub_seed(master_seed, stream, index))
