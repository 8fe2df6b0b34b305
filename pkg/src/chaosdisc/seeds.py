"""Reproducible random-stream derivation.

One master seed drives every experiment. Replica i of a stream tagged
``tag`` uses ``SeedSequence([master_seed, crc32(tag), i])``, so the same
(master seed, tag, index) always yields the same generator regardless of
how replicas are distributed over workers.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def derived_rng(master_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Generator for one replica of one named stream."""
    seq = np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, stream_key(tag), index])
    return np.random.Generator(np.random.PCG64(seq))


def replica_rngs(master_seed: int, tag: str, count: int):
    return [derived_rng(master_seed, tag, i) for i in range(count)]
