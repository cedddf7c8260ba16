"""Counter-based seed derivation: every random stream is keyed by
(root seed, module name, job index), never by global generator state."""
from __future__ import annotations

import zlib

import numpy as np


def module_key(module: str) -> int:
    return zlib.crc32(module.encode())


def derive_seed(root: int, module: str, index: int) -> int:
    """64-bit seed for job ``index`` of ``module``."""
    ss = np.random.SeedSequence(int(root), spawn_key=(module_key(module), int(index)))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def derive_rng(root: int, module: str, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(root), spawn_key=(module_key(module), int(index))))
