"""Deterministic, hierarchical random streams.

Every stochastic routine takes a RandomStream rather than a bare seed, so
that work items (motions, bootstrap replicates) can run in any order or on
any number of workers and still reproduce bit-identical draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RandomStream:
    """A (master seed, stream index) pair identifying one draw sequence.

    Identical (master_seed, index, path) always yields an identical
    generator state; `child(k)` derives an independent sub-stream.
    """

    master_seed: int
    index: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master seed must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed,
                                     spawn_key=self.path + (self.index,))
        return np.random.default_rng(seq)

    def child(self, k: int) -> "RandomStream":
        return RandomStream(self.master_seed, k, self.path + (self.index,))
