"""Replay graph: transitions stored on edges of a nested hash table.

The outer key is the successor vertex ``v'`` and the inner key the
predecessor ``v``, so all predecessor edges of a vertex are one dict lookup.
Every container whose iteration order matters is a dict (insertion ordered),
never a set: byte keys hash differently across interpreter runs and set
order would leak that into sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from ter.core import StateKey, Transition, TransitionStore
from ter.hashing import ProjectionMatrix


@dataclass
class Edge:
    indices: list[int] = field(default_factory=list)
    count: int = 0


class IndexedSet:
    """Insertion-ordered set with O(1) add, remove and uniform sampling."""

    def __init__(self) -> None:
        self._items: list[StateKey] = []
        self._pos: dict[StateKey, int] = {}

    def add(self, item: StateKey) -> None:
        if item not in self._pos:
            self._pos[item] = len(self._items)
            self._items.append(item)

    def discard(self, item: StateKey) -> None:
        pos = self._pos.pop(item, None)
        if pos is None:
            return
        last = self._items.pop()
        if pos < len(self._items):
            self._items[pos] = last
            self._pos[last] = pos

    def __contains__(self, item: object) -> bool:
        return item in self._pos

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[StateKey]:
        return iter(self._items)

    def __getitem__(self, i: int) -> StateKey:
        return self._items[i]


class TopologicalGraph:
    def __init__(self, weighted_predecessors: bool = False) -> None:
        self.weighted_predecessors = weighted_predecessors
        self._pred: dict[StateKey, dict[StateKey, Edge]] = {}
        self._degree: dict[StateKey, int] = {}
        self._edge_of: dict[int, tuple[StateKey, StateKey]] = {}
        self.terminal_set = IndexedSet()
        self._returns: dict[StateKey, list] = {}  # v -> [sum of G, visits]
        self.transition_count = 0

    # -- structure ---------------------------------------------------------

    @property
    def vertices(self) -> dict[StateKey, int]:
        """Vertex -> number of incident edge endpoints (self-loops count twice)."""
        return self._degree

    def __contains__(self, v: object) -> bool:
        return v in self._degree

    def n_edges(self) -> int:
        return sum(len(inner) for inner in self._pred.values())

    def edge(self, v: StateKey, v_next: StateKey) -> Optional[Edge]:
        return self._pred.get(v_next, {}).get(v)

    def edge_count(self, v: StateKey, v_next: StateKey) -> int:
        e = self.edge(v, v_next)
        return 0 if e is None else e.count

    def edges(self) -> Iterator[tuple[StateKey, StateKey, Edge]]:
        for v_next, inner in self._pred.items():
            for v, e in inner.items():
                yield v, v_next, e

    def predecessors(self, v_next: StateKey) -> dict[StateKey, Edge]:
        return self._pred.get(v_next, {})

    def edge_of(self, idx: int) -> Optional[tuple[StateKey, StateKey]]:
        return self._edge_of.get(idx)

    def insert_transition(
        self,
        idx: int,
        t: Transition,
        phi: Optional[ProjectionMatrix] = None,
        keys: Optional[tuple[StateKey, StateKey]] = None,
    ) -> tuple[StateKey, StateKey]:
        """Store transition ``idx`` on edge ``(phi(s), phi(s'))``.

        Precomputed ``keys`` skip the projection. Returns the edge keys.
        """
        if keys is None:
            if phi is None:
                raise ValueError("need either a projection or precomputed keys")
            keys = (phi.project(t.state), phi.project(t.next_state))
        v, v_next = keys
        inner = self._pred.get(v_next)
        if inner is None:
            inner = self._pred[v_next] = {}
        e = inner.get(v)
        if e is None:
            e = inner[v] = Edge()
            self._degree[v] = self._degree.get(v, 0) + 1
            self._degree[v_next] = self._degree.get(v_next, 0) + 1
        e.indices.append(idx)
        e.count += 1
        self._edge_of[idx] = keys
        self.transition_count += 1
        if t.terminal:
            self.terminal_set.add(v_next)
        return keys

    # -- sampling ----------------------------------------------------------

    def predecessor_edges(
        self,
        v_next: StateKey,
        budget: Optional[int],
        rng: np.random.Generator,
        per_edge_budget: Optional[int] = 1,
    ) -> list[tuple[StateKey, list[int]]]:
        """Sample up to ``budget`` predecessor vertices of ``v_next``.

        Each chosen predecessor is paired with up to ``per_edge_budget``
        transitions drawn without replacement from its edge (``None`` means
        every stored transition). In weighted mode predecessors are drawn in
        proportion to their edge visitation counts.
        """
        inner = self._pred.get(v_next)
        if not inner:
            return []
        preds = list(inner)
        n = len(preds)
        if budget is None or n <= budget:
            chosen: Iterable[int] = range(n)
        elif self.weighted_predecessors:
            counts = np.fromiter((inner[u].count for u in preds), dtype=np.float64, count=n)
            chosen = rng.choice(n, size=budget, replace=False, p=counts / counts.sum())
        else:
            chosen = rng.choice(n, size=budget, replace=False)
        out = []
        for j in chosen:
            u = preds[int(j)]
            idxs = inner[u].indices
            if per_edge_budget is None or len(idxs) <= per_edge_budget:
                picked = list(idxs)
            elif per_edge_budget == 1:
                picked = [idxs[int(rng.integers(len(idxs)))]]
            else:
                sel = rng.choice(len(idxs), size=per_edge_budget, replace=False)
                picked = [idxs[int(k)] for k in sel]
            out.append((u, picked))
        return out

    def sample_terminal_roots(self, n: int, rng: np.random.Generator) -> list[StateKey]:
        m = len(self.terminal_set)
        if m == 0:
            return []
        if n >= m:
            return list(self.terminal_set)
        return [self.terminal_set[int(j)] for j in rng.choice(m, size=n, replace=False)]

    # -- pruning -----------------------------------------------------------

    def _drop_edge(self, v: StateKey, v_next: StateKey) -> None:
        inner = self._pred[v_next]
        del inner[v]
        if not inner:
            del self._pred[v_next]
            self.terminal_set.discard(v_next)
        for u in (v, v_next):
            d = self._degree[u] - 1
            if d:
                self._degree[u] = d
            else:
                del self._degree[u]
                self.terminal_set.discard(u)
                self._returns.pop(u, None)

    def _prune_edge(self, v: StateKey, v_next: StateKey, store: TransitionStore) -> int:
        """Drop the expired prefix of one edge list; returns transitions removed."""
        e = self._pred[v_next][v]
        k = 0
        # edge lists are in insertion order, so expired entries form a prefix
        while k < len(e.indices) and store.is_expired(e.indices[k]):
            self._edge_of.pop(e.indices[k], None)
            k += 1
        if k:
            del e.indices[:k]
            self.transition_count -= k
            if not e.indices:
                self._drop_edge(v, v_next)
        return k

    def prune(self, store: TransitionStore, batch: Iterable[int]) -> list[int]:
        """Remove expired members from ``batch`` and from their edges."""
        surviving = []
        for idx in batch:
            if not store.is_expired(idx):
                surviving.append(idx)
                continue
            keys = self._edge_of.get(idx)
            if keys is not None:
                self._prune_edge(keys[0], keys[1], store)
        return surviving

    def prune_all(self, store: TransitionStore) -> int:
        """Full sweep over every edge; returns transitions removed."""
        removed = 0
        for v, v_next, _ in list(self.edges()):
            removed += self._prune_edge(v, v_next, store)
        return removed

    # -- pseudo-terminal statistics ---------------------------------------

    def update_vertex_return(self, v: StateKey, g: float) -> None:
        rec = self._returns.get(v)
        if rec is None:
            self._returns[v] = [float(g), 1]
        else:
            rec[0] += g
            rec[1] += 1

    def vertex_return(self, v: StateKey) -> tuple[float, int]:
        """Mean accumulated return ``U(v)`` and visit count ``|S(v)|``."""
        total, n = self._returns[v]
        return total / n, n

    def pseudo_terminal_distribution(self, kappa: float) -> tuple[list[StateKey], np.ndarray]:
        """Boltzmann distribution over vertices with return statistics.

        Returns the vertex list and aligned probabilities
        ``exp(U(v)/kappa) / sum exp(U(u)/kappa)``.
        """
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        keys = [v for v in self._returns if v in self._degree]
        if not keys:
            raise ValueError("pseudo-terminal distribution over an empty graph")
        u = np.array([self._returns[v][0] / self._returns[v][1] for v in keys])
        return keys, boltzmann(u, kappa)

    def sample_pseudo_terminal_roots(
        self, n: int, kappa: float, rng: np.random.Generator
    ) -> list[StateKey]:
        """``n`` i.i.d. draws from the Boltzmann distribution, deduplicated."""
        if not self._returns:
            return []
        keys, p = self.pseudo_terminal_distribution(kappa)
        picks = rng.choice(len(keys), size=n, replace=True, p=p)
        return list(dict.fromkeys(keys[int(j)] for j in picks))

    # -- debugging ---------------------------------------------------------

    def dump(self) -> str:
        """One line per edge: ``v_hex v'_hex n_transitions count``."""
        lines = [
            f"{v.hex()} {v_next.hex()} {len(e.indices)} {e.count}" for v, v_next, e in self.edges()
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def check_invariants(self, store: Optional[TransitionStore] = None) -> None:
        total = sum(len(e.indices) for _, _, e in self.edges())
        assert total == self.transition_count, (total, self.transition_count)
        for v, v_next, e in self.edges():
            assert e.indices, "empty edge left in graph"
            assert v in self._degree and v_next in self._degree
            for idx in e.indices:
                assert self._edge_of[idx] == (v, v_next)
        for v in self.terminal_set:
            assert v in self._pred, "terminal vertex without predecessors"
        if store is not None:
            for _, _, e in self.edges():
                for idx in e.indices:
                    store.insert_step(idx)


def boltzmann(values: np.ndarray, temperature: float) -> np.ndarray:
    z = (np.asarray(values, dtype=np.float64) - np.max(values)) / temperature
    p = np.exp(z)
    return p / p.sum()


def parse_dump(text: str) -> list[tuple[str, str, int, int]]:
    rows = []
    for line in text.splitlines():
        if line.strip():
            a, b, n, c = line.split()
            rows.append((a, b, int(n), int(c)))
    return rows


__all__ = [
    "Edge",
    "IndexedSet",
    "TopologicalGraph",
    "boltzmann",
    "parse_dump",
]
