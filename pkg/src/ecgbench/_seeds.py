"""Stable seed derivation shared by the corpus generator and the evaluation harness."""

import zlib

import numpy as np


def derive_seed(*keys) -> int:
    """63-bit seed from a tuple of integers and strings, independent of hash randomisation."""
    ints = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys]
    return int(np.random.SeedSequence(ints).generate_state(1, np.uint64)[0] >> np.uint64(1))
