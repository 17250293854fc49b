"""Array-backed sum tree for proportional prioritized sampling."""

from __future__ import annotations

import numpy as np


class SumTree:
    """Complete binary tree over ``capacity`` leaves (padded to a power of two).

    Node ``1`` is the root; node ``i`` has children ``2i`` and ``2i+1``;
    leaves occupy ``[size, 2*size)``.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        size = 1
        while size < self.capacity:
            size *= 2
        self.size = size
        self.depth = size.bit_length() - 1
        self.tree = np.zeros(2 * size, dtype=np.float64)

    def __len__(self) -> int:
        return self.capacity

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def __getitem__(self, i: int) -> float:
        if not 0 <= i < self.capacity:
            raise IndexError(i)
        return float(self.tree[self.size + i])

    def __setitem__(self, i: int, p: float) -> None:
        if not 0 <= i < self.capacity:
            raise IndexError(i)
        if p < 0 or not np.isfinite(p):
            raise ValueError(f"invalid priority {p!r}")
        node = self.size + i
        self.tree[node] = p
        node //= 2
        tree = self.tree
        while node:
            # recompute rather than add a delta, so sums never drift
            tree[node] = tree[2 * node] + tree[2 * node + 1]
            node //= 2

    def set_many(self, idx: np.ndarray, p: np.ndarray) -> None:
        """Vectorised assignment; with duplicate indices the last value wins."""
        idx = np.asarray(idx, dtype=np.int64)
        p = np.asarray(p, dtype=np.float64)
        if idx.size == 0:
            return
        if idx.min() < 0 or idx.max() >= self.capacity:
            raise IndexError("leaf index out of range")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("invalid priority")
        _, first_rev = np.unique(idx[::-1], return_index=True)
        keep = idx.size - 1 - first_rev
        idx, p = idx[keep], p[keep]
        nodes = idx + self.size
        self.tree[nodes] = p
        tree = self.tree
        nodes = np.unique(nodes // 2)
        while nodes[0] >= 1:
            tree[nodes] = tree[2 * nodes] + tree[2 * nodes + 1]
            if nodes[0] == 1:
                break
            nodes = np.unique(nodes // 2)

    def leaves(self) -> np.ndarray:
        return self.tree[self.size : self.size + self.capacity]

    def find(self, mass: np.ndarray) -> np.ndarray:
        """Leaf indices whose cumulative-priority interval contains ``mass``.

        Vectorised descent; a zero-priority subtree is never entered.
        """
        mass = np.array(mass, dtype=np.float64, ndmin=1)
        node = np.ones(mass.shape, dtype=np.int64)
        tree = self.tree
        for _ in range(self.depth):
            left = 2 * node
            lsum = tree[left]
            go_right = (mass >= lsum) & (tree[left + 1] > 0)
            mass = np.where(go_right, mass - lsum, mass)
            node = np.where(go_right, left + 1, left)
        return node - self.size

    def sample_stratified(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """One draw from each of ``n`` equal-mass segments of the total."""
        total = self.total
        if total <= 0:
            raise ValueError("cannot sample from an empty sum tree")
        seg = total / n
        u = (np.arange(n) + rng.random(n)) * seg
        return self.find(np.minimum(u, np.nextafter(total, 0)))
