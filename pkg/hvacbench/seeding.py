"""Named sub-seeds derived from one global seed."""

from __future__ import annotations

import zlib

import numpy as np


def sub_seed(global_seed: int, name: str) -> int:
    """Stable 32-bit seed for a named random stream (scenario, init, ppo, ...)."""
    seq = np.random.SeedSequence([int(global_seed), zlib.crc32(name.encode("utf-8"))])
    return int(seq.generate_state(1)[0])


def sub_rng(global_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(sub_seed(global_seed, name))
