"""Deterministic randomness with per-purpose substreams.

Sample draws, block draws, and snapshot-index draws come from three
independently seeded substreams so that two solver implementations consume
exactly the same draws even when they request them at different points of
the epoch (e.g. the snapshot index before versus after the inner loop).
"""
from __future__ import annotations

import numpy as np


class RngStream:
    def __init__(self, seed: int):
        self.seed = int(seed)
        root = np.random.SeedSequence(self.seed)
        samples_ss, blocks_ss, sigma_ss = root.spawn(3)
        self._samples = np.random.default_rng(samples_ss)
        self._blocks = np.random.default_rng(blocks_ss)
        self._sigma = np.random.default_rng(sigma_ss)
        self.sample_draws = 0
        self.block_draws = 0
        self.sigma_draws = 0

    def draw_batch(self, n: int, b: int) -> np.ndarray:
        """b distinct sample ids from {0..n-1}."""
        self.sample_draws += 1
        if b == 1:
            return np.array([self._samples.integers(n)], dtype=np.int64)
        return np.sort(self._samples.choice(n, size=b, replace=False)).astype(np.int64)

    def draw_block(self, B: int) -> int:
        self.block_draws += 1
        return int(self._blocks.integers(B))

    def draw_sigma(self, m: int) -> int:
        """Snapshot inner index, uniform on {1..m}."""
        self.sigma_draws += 1
        return int(self._sigma.integers(1, m + 1))
