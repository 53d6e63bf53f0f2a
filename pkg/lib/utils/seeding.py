#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Seeding

Counter-based seed derivation. Every stream is keyed by (global seed,
stage, key) so adding a client never perturbs another client's stream.

MIT License
See LICENSE file for full license text.
"""

import zlib
from typing import Union

import numpy as np


def _key_word(key: Union[str, int]) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(global_seed: int, *keys: Union[str, int]) -> int:
    """Derive a 32-bit seed from a global seed and a path of keys.

    Args:
        global_seed: Experiment-wide seed
        keys: Stage names, client ids or counters

    Returns:
        Non-negative integer seed
    """
    sequence = np.random.SeedSequence(
        entropy=int(global_seed), spawn_key=tuple(_key_word(k) for k in keys)
    )
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def make_rng(global_seed: int, *keys: Union[str, int]) -> np.random.Generator:
    """Numpy generator for a derived stream."""
    return np.random.default_rng(derive_seed(global_seed, *keys))
