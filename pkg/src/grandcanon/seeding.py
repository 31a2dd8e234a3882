"""Deterministic seed derivation.

Every stochastic routine takes an explicit integer seed. Sub-streams (sample
blocks, trials, experiments) are derived from it so results never depend on
how work is scheduled.
"""

import hashlib

import numpy as np


def derive_seed(master_seed, *labels):
    """Hash ``(master_seed, *labels)`` to a 64-bit integer.

    The key is the colon-joined decimal/str form, hashed with SHA-256; the
    first eight bytes (big endian) form the seed.
    """
    key = ":".join([str(int(master_seed))] + [str(x) for x in labels])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def generator(seed, *spawn_key):
    """Counter-based Philox generator for ``seed`` and an integer spawn key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.Philox(ss))
