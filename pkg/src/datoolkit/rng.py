"""Seeded randomness with deterministic derivation of child streams."""

from __future__ import annotations

import numpy as np


class RngHandle:
    """Deterministic pseudo-random source: same seed, bit-identical draws.

    ``spawn(i)`` derives an independent child stream keyed on ``i``; the
    derivation is stable across runs and platforms, so repetitions may run
    in any order (or in parallel) without changing results.
    """

    __slots__ = ("seed", "key", "_gen")

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self._gen: np.random.Generator | None = None

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
            self._gen = np.random.Generator(np.random.PCG64(seq))
        return self._gen

    def spawn(self, *key: int) -> "RngHandle":
        return RngHandle(self.seed, self.key + key)

    def __repr__(self) -> str:
        return f"RngHandle(seed={self.seed}, key={self.key})"
