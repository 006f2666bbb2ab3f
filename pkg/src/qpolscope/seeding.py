"""Deterministic child-seed derivation.

Every stochastic stage draws from its own generator, keyed by
``(master seed, stage label, index...)``. Keys are mixed with numpy's
``SeedSequence`` hash so that pixels and sweep angles can be simulated in any
order (or in parallel) and still reproduce bit-identical streams.
"""

from __future__ import annotations

import zlib

import numpy as np

MAX_SEED = 2**64 - 1


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def child_seed(master: int, label: str, *index: int) -> int:
    """Return a 64-bit seed derived from ``master``, a stage label and indices."""
    if not 0 <= int(master) <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {master}")
    ss = np.random.SeedSequence(
        entropy=int(master), spawn_key=(_label_key(label), *(int(i) for i in index))
    )
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def rng_for(master: int, label: str, *index: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(master, label, *index))
