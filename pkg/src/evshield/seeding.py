"""Named random streams derived from one master seed.

``derive_rng(master, "fed", 3, "c1")`` always yields the same generator, and
streams with different key paths are statistically independent. Keys are
hashed with CRC-32 into the SeedSequence spawn key, so adding a new stage
never shifts the streams of existing ones.
"""
import zlib

import numpy as np


def _word(key):
    if isinstance(key, (int, np.integer)) and 0 <= key < 2**32:
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed_sequence(master, *keys):
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(_word(k) for k in keys))


def derive_rng(master, *keys):
    return np.random.default_rng(derive_seed_sequence(master, *keys))


def derive_int(master, *keys):
    """A 32-bit integer seed for APIs that take plain ints."""
    return int(derive_seed_sequence(master, *keys).generate_state(1)[0])
