"""Deterministic random streams (PCG64) with stable named substreams."""

from __future__ import annotations

import zlib

import numpy as np

from .autodiff import REAL


class Rng:
    """Seeded PCG64 stream. Same seed + same call sequence = same outputs.

    ``derive`` produces an independent child stream from a string tag, so
    pipeline stages can be reseeded identically whether or not earlier stages
    ran in this process.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def derive(self, tag: str) -> "Rng":
        child = np.random.SeedSequence([self.seed & 0x7FFFFFFFFFFFFFFF, zlib.crc32(tag.encode())])
        return Rng(int(child.generate_state(1)[0]))

    def normal(self, shape=(), std: float = 1.0, dtype=REAL) -> np.ndarray:
        return (self._gen.standard_normal(shape) * std).astype(dtype)

    def uniform(self, shape=(), low: float = 0.0, high: float = 1.0, dtype=REAL) -> np.ndarray:
        return self._gen.uniform(low, high, shape).astype(dtype)

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)
