"""Deterministic seed derivation.

Every random draw in this package flows from a single 64-bit master seed.
Substreams are named by a path of labels (strings or ints). String labels
are hashed with BLAKE2b to stable 64-bit integers and the whole path feeds
``numpy.random.SeedSequence``, so ``(master, path)`` names the same stream
on every platform, run, and process. This is the splitting scheme the CLI's
``--seed`` flag documents.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(master: int, *path) -> np.random.SeedSequence:
    """SeedSequence for the substream named by ``path`` under ``master``."""
    entropy = [int(master) & _MASK64] + [_label_to_int(p) for p in path]
    return np.random.SeedSequence(entropy)


def rng_for(master: int, *path) -> np.random.Generator:
    """Fresh generator for the named substream."""
    return np.random.default_rng(seed_sequence(master, *path))


def child_seed(master: int, *path) -> int:
    """Collapse a substream name back into a plain 64-bit seed."""
    state = seed_sequence(master, *path).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 32 | int(state[1])) & _MASK64
