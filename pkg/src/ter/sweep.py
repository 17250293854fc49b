"""Reverse breadth-first sweep over the replay graph, and TER/PER batch mixing."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ter.core import StateKey, TransitionStore
from ter.graph import TopologicalGraph


class RootsMode(str, Enum):
    TERMINAL = "terminal"
    PSEUDO_TERMINAL = "pseudo_terminal"


class BatchUnderflowError(RuntimeError):
    pass


@dataclass
class SweepState:
    search_queue: deque = field(default_factory=deque)
    visited_vertex: set = field(default_factory=set)
    batch_queue: deque = field(default_factory=deque)
    roots_mode: RootsMode = RootsMode.TERMINAL
    epoch: int = 0
    pushed_this_epoch: int = 0


class ReverseSweep:
    """Batch producer that walks the graph backwards from terminal vertices.

    Each refill step pops a frontier vertex, samples some of its predecessor
    edges, queues the predecessors for expansion and their stored
    transitions for training, and marks the vertex expanded. When the
    frontier runs dry a new epoch starts from freshly sampled roots with an
    empty visited set. The frontier survives across calls, so consecutive
    batches continue the same sweep.

    Args:
        graph: the replay graph the sweep reads (and prunes).
        store: the transition arena, used for age-based pruning.
        rng: sampling generator.
        root_budget: roots drawn per epoch.
        pred_budget: predecessor vertices expanded per frontier vertex;
            ``None`` expands all of them.
        per_edge_budget: transitions taken from each expanded edge;
            ``None`` takes all.
        roots_mode: terminal roots, or Boltzmann pseudo-terminal roots.
        kappa: Boltzmann temperature in pseudo-terminal mode.
        max_empty_resets: consecutive epochs yielding no transitions before
            :meth:`refill` reports starvation.
        record_expansions: keep ``(epoch, vertex)`` for every expansion.
    """

    def __init__(
        self,
        graph: TopologicalGraph,
        store: Optional[TransitionStore],
        rng: np.random.Generator,
        root_budget: int = 8,
        pred_budget: Optional[int] = 3,
        per_edge_budget: Optional[int] = 1,
        roots_mode: RootsMode | str = RootsMode.TERMINAL,
        kappa: float = 0.01,
        max_empty_resets: int = 3,
        record_expansions: bool = False,
    ):
        self.graph = graph
        self.store = store
        self.rng = rng
        self.root_budget = root_budget
        self.pred_budget = pred_budget
        self.per_edge_budget = per_edge_budget
        self.kappa = kappa
        self.max_empty_resets = max_empty_resets
        self.state = SweepState(roots_mode=RootsMode(roots_mode))
        self.expansion_log: Optional[list[tuple[int, StateKey]]] = [] if record_expansions else None
        self.n_expansions = 0
        self.n_resets = 0

    def _sample_roots(self) -> list[StateKey]:
        if self.state.roots_mode is RootsMode.PSEUDO_TERMINAL:
            return self.graph.sample_pseudo_terminal_roots(self.root_budget, self.kappa, self.rng)
        return self.graph.sample_terminal_roots(self.root_budget, self.rng)

    def _reset(self) -> bool:
        roots = self._sample_roots()
        if not roots:
            return False
        st = self.state
        st.search_queue.extend(roots)
        st.visited_vertex = set()
        st.epoch += 1
        st.pushed_this_epoch = 0
        self.n_resets += 1
        return True

    def refill(self, batch_size: int) -> bool:
        """Grow ``batch_queue`` to at least ``batch_size``; False on starvation."""
        st = self.state
        empty_epochs = 0
        while len(st.batch_queue) < batch_size:
            if not st.search_queue:
                if st.epoch and st.pushed_this_epoch == 0:
                    empty_epochs += 1
                    if empty_epochs >= self.max_empty_resets:
                        return False
                if not self._reset():
                    return False
                continue
            v_next = st.search_queue.popleft()
            if v_next in st.visited_vertex:
                continue
            for u, idxs in self.graph.predecessor_edges(
                v_next, self.pred_budget, self.rng, self.per_edge_budget
            ):
                st.search_queue.append(u)
                st.batch_queue.extend(idxs)
                st.pushed_this_epoch += len(idxs)
            st.visited_vertex.add(v_next)
            self.n_expansions += 1
            if self.expansion_log is not None:
                self.expansion_log.append((st.epoch, v_next))
        return True

    def pop_batch(self, batch_size: int) -> list[int]:
        q = self.state.batch_queue
        if len(q) < batch_size:
            raise BatchUnderflowError(f"batch_queue holds {len(q)} < {batch_size}")
        return [q.popleft() for _ in range(batch_size)]

    def sample(self, batch_size: int) -> Optional[list[int]]:
        """Refill, pop and prune until ``batch_size`` live indices are found.

        Expired transitions are removed from the batch and from the graph
        and replaced by further pops. Returns None on starvation.
        """
        out: list[int] = []
        while len(out) < batch_size:
            need = batch_size - len(out)
            if not self.refill(need):
                return None
            popped = self.pop_batch(need)
            if self.store is not None:
                popped = self.graph.prune(self.store, popped)
            out.extend(popped)
        return out


def per_share(eta: float, batch_size: int) -> int:
    """Number of PER-sourced members: ceil(eta * B), robust to float noise."""
    return int(math.ceil(round(eta * batch_size, 9)))


@dataclass
class MixedBatch:
    indices: list[int]
    weights: np.ndarray
    from_per: np.ndarray  # bool per member
    starved: bool = False


def mixed_batch(sweep: ReverseSweep, per, eta: float, batch_size: int,
                rng: np.random.Generator) -> MixedBatch:
    """ceil(eta*B) members from PER (with IS weights), the rest from the sweep.

    If the sweep starves, the whole batch comes from PER.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("mixing ratio must lie in [0, 1]")
    n_per = per_share(eta, batch_size)
    n_ter = batch_size - n_per
    ter_idx: list[int] = []
    starved = False
    if n_ter:
        got = sweep.sample(n_ter)
        if got is None:
            starved = True
            n_per = batch_size
        else:
            ter_idx = got
    if n_per:
        per_idx, per_w = per.sample(n_per, rng)
    else:
        per_idx, per_w = [], np.empty(0)
    indices = list(per_idx) + ter_idx
    weights = np.concatenate([np.asarray(per_w, dtype=np.float64), np.ones(len(ter_idx))])
    from_per = np.zeros(len(indices), dtype=bool)
    from_per[: len(per_idx)] = True
    return MixedBatch(indices, weights, from_per, starved)
