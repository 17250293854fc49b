from __future__ import annotations

import numpy as np

from ter.core import TransitionStore


class UniformReplay:
    """Uniform experience replay: i.i.d. indices over the live transitions."""

    def __init__(self, store: TransitionStore):
        self.store = store

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[int]:
        lo, hi = self.store.live_range()
        if hi <= lo:
            raise ValueError("cannot sample from an empty store")
        return rng.integers(lo, hi, size=batch_size).tolist()
