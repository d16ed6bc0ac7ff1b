"""Deterministic seed derivation.

Every random component draws from a counter-based Philox stream keyed by
(master seed, purpose tag, index), so any single component can be re-run in
isolation and results do not depend on execution order or thread count.
"""

from __future__ import annotations

import zlib

import numpy as np

RNG_FAMILY = "numpy.random.Philox"


def _tag_hash(purpose: str) -> int:
    # crc32 is stable across platforms and Python versions
    return zlib.crc32(purpose.encode("utf-8"))


def derive_seed_sequence(master_seed: int, purpose: str, index: int = 0) -> np.random.SeedSequence:
    if not 0 <= int(master_seed) < 2**64:
        raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
    return np.random.SeedSequence([int(master_seed), _tag_hash(purpose), int(index)])


def derive_rng(master_seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Counter-based generator for one (purpose, index) slot of a master seed."""
    return np.random.Generator(np.random.Philox(derive_seed_sequence(master_seed, purpose, index)))


def derive_seed(master_seed: int, purpose: str, index: int = 0) -> int:
    """A plain 64-bit integer sub-seed (for components that take seeds, not generators)."""
    return int(derive_seed_sequence(master_seed, purpose, index).generate_state(1, np.uint64)[0])
