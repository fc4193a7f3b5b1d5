"""Deterministic random stream derivation.

Every random quantity in the package is drawn from a stream derived from a
single master seed plus a tuple of tags (trial index, purpose string, grid
coordinates, ...).  Two streams with different tags are statistically
independent, and the same (master, tags) pair always yields the same stream,
on any platform, regardless of how many other streams were created first.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed_sequence", "derive_rng", "tag_hash"]


def tag_hash(tag: object) -> int:
    """Map an arbitrary tag (int or str) to a stable 64-bit integer."""
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    data = str(tag).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def derive_seed_sequence(master_seed: int, *tags: object) -> np.random.SeedSequence:
    """SeedSequence for the stream identified by (master_seed, tags)."""
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF] + [tag_hash(t) for t in tags]
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed: int, *tags: object) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, tags)."""
    return np.random.default_rng(derive_seed_sequence(master_seed, *tags))
