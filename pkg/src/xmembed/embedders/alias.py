"""Walker/Vose alias tables for O(1) sampling from a fixed discrete distribution."""

from __future__ import annotations

import numpy as np


class AliasTable:
    """Alias table over ``len(weights)`` outcomes with probabilities proportional to ``weights``."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise ValueError("weights must be non-negative, finite and not all zero")
        n = w.size
        scaled = w * (n / w.sum())
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] = scaled[l] + scaled[s] - 1.0
            (small if scaled[l] < 1.0 else large).append(l)
        # leftovers are 1 up to rounding
        for i in small + large:
            prob[i] = 1.0
            alias[i] = i
        self.prob = prob
        self.alias = alias
        self.probabilities = w / w.sum()

    def __len__(self) -> int:
        return self.prob.size

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = rng.integers(0, self.prob.size, size=size)
        keep = rng.random(size) < self.prob[idx]
        return np.where(keep, idx, self.alias[idx])
