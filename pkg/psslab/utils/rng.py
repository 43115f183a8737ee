"""Counter-based random streams with explicit substream derivation.

Every stream comes from `SeedSequence(seed, spawn_key=key)` feeding a Philox
generator. The lab uses key `(replication,)`, so replication n of any run sees the
same stream no matter which policy or load it simulates.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for (seed, key)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


class RandomStream:
    """Uniforms and unit exponentials served from pre-drawn blocks."""

    __slots__ = ("generator", "block", "_uniforms", "_u_pos", "_exponentials", "_e_pos")

    def __init__(self, generator: np.random.Generator, block: int = 8192) -> None:
        self.generator = generator
        self.block = block
        self._uniforms = generator.random(block)
        self._u_pos = 0
        self._exponentials = generator.standard_exponential(block)
        self._e_pos = 0

    @classmethod
    def for_replication(cls, seed: int, replication: int, block: int = 8192) -> RandomStream:
        return cls(substream(seed, replication), block)

    def uniform(self) -> float:
        if self._u_pos == self.block:
            self._uniforms = self.generator.random(self.block)
            self._u_pos = 0
        value = self._uniforms[self._u_pos]
        self._u_pos += 1
        return float(value)

    def exponential(self, rate: float) -> float:
        """Exponential variate with the given rate."""
        if self._e_pos == self.block:
            self._exponentials = self.generator.standard_exponential(self.block)
            self._e_pos = 0
        value = self._exponentials[self._e_pos]
        self._e_pos += 1
        return float(value) / rate

    def choice(self, n: int) -> int:
        """Uniform index in range(n)."""
        return min(int(self.uniform() * n), n - 1)
