"""Proportional prioritized experience replay over the shared arena."""

from __future__ import annotations

import numpy as np

from ter.baselines.sumtree import SumTree
from ter.core import TransitionStore


class LinearSchedule:
    """Linear interpolation from ``start`` to ``end`` over ``steps``, clamped."""

    def __init__(self, start: float, end: float, steps: int):
        self.start = start
        self.end = end
        self.steps = max(int(steps), 1)

    def __call__(self, t: int) -> float:
        frac = min(max(t, 0) / self.steps, 1.0)
        return (1.0 - frac) * self.start + frac * self.end


class PrioritizedReplay:
    """PER with priorities ``(|td| + eps)^alpha`` and IS exponent ``beta``.

    Transition index ``i`` lives in leaf ``i % n_leaves``. The tree has more
    leaves than the store can hold live transitions, so a slot is only reused
    after its previous occupant expired. Expired leaves are zeroed as the
    store's expiry boundary advances.
    """

    def __init__(
        self,
        store: TransitionStore,
        alpha: float = 0.6,
        beta: float | LinearSchedule = 0.4,
        eps: float = 1e-6,
        n_leaves: int | None = None,
    ):
        self.store = store
        self.alpha = alpha
        self.beta = beta if callable(beta) else LinearSchedule(beta, beta, 1)
        self.eps = eps
        self.tree = SumTree(n_leaves or store.capacity + 2)
        self._owner = np.full(self.tree.capacity, -1, dtype=np.int64)
        self.max_priority = 1.0
        self._n_live = 0
        self._expire_ptr = 0
        self.step = 0

    def _expire(self) -> None:
        lo = self.store.first_live()
        if lo <= self._expire_ptr:
            return
        idx = np.arange(self._expire_ptr, lo)
        slots = idx % self.tree.capacity
        mine = self._owner[slots] == idx
        n_gone = int(mine.sum())
        self.tree.set_many(slots[mine], np.zeros(n_gone))
        self._owner[slots[mine]] = -1
        self._n_live -= n_gone
        self._expire_ptr = lo

    def add(self, idx: int) -> None:
        """Register a new transition with the current maximum priority."""
        slot = idx % self.tree.capacity
        prev = self._owner[slot]
        if prev >= 0 and not self.store.is_expired(int(prev)):
            raise RuntimeError("sum tree too small for the live transition window")
        if prev < 0:
            self._n_live += 1
        self._owner[slot] = idx
        self.tree[slot] = self.max_priority
        self._expire()

    def __len__(self) -> int:
        return self._n_live

    def priority(self, idx: int) -> float:
        slot = idx % self.tree.capacity
        return self.tree[slot] if self._owner[slot] == idx else 0.0

    def sample(self, batch_size: int, rng: np.random.Generator) -> tuple[list[int], np.ndarray]:
        """Stratified proportional sample; weights normalised by the batch max."""
        self._expire()
        total = self.tree.total
        if total <= 0:
            raise ValueError("cannot sample from an empty prioritized replay")
        slots = self.tree.sample_stratified(batch_size, rng)
        indices = self._owner[slots]
        probs = self.tree.tree[self.tree.size + slots] / total
        n = len(self)
        w = (n * probs) ** (-self.beta(self.step))
        return indices.tolist(), w / w.max()

    def update_priorities(self, indices, td_errors) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        p = (np.abs(np.asarray(td_errors, dtype=np.float64)) + self.eps) ** self.alpha
        slots = indices % self.tree.capacity
        live = self._owner[slots] == indices
        live &= indices >= self.store.first_live()
        if np.any(live):
            self.tree.set_many(slots[live], p[live])
            self.max_priority = max(self.max_priority, float(p[live].max()))
