"""Per-stage seed derivation: every random stream descends from one global seed."""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(seed: int, stage: str) -> int:
    """Mix a stage name into ``seed``; stable across runs and platforms."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(stage.encode("utf-8"))])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, stage))
