"""Small shared helpers."""

from __future__ import annotations

import zlib

import numpy as np


def rng_for(seed: int, *names: str) -> np.random.Generator:
    """Named, independent random substream derived from a base seed.

    Distinct name tuples give statistically independent generators, so
    adding a consumer never perturbs the draws of another.
    """
    entropy = [int(seed) & 0xFFFFFFFF] + [
        zlib.crc32(name.encode("utf-8")) for name in names
    ]
    return np.random.default_rng(np.random.SeedSequence(entropy))
