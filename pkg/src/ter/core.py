"""Shared replay types: transitions, the bounded transition arena, batches."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

StateKey = bytes


class ExpiredTransitionError(LookupError):
    """Raised when the payload of an evicted transition is requested."""


@dataclass(frozen=True, eq=False)
class Transition:
    """One environment step ``(s, a, r, s', terminal, timeout)``."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool = False
    timeout: bool = False
    insert_step: int = 0

    def validate(self) -> None:
        if self.terminal and self.timeout:
            raise ValueError("transition cannot be both terminal and timeout")
        if not math.isfinite(self.reward):
            raise ValueError(f"non-finite reward {self.reward!r}")
        if self.action < 0:
            raise ValueError(f"negative action id {self.action}")
        if self.insert_step < 0:
            raise ValueError(f"negative insert_step {self.insert_step}")
        if self.state.shape != self.next_state.shape:
            raise ValueError("state and next_state dimensions differ")
        if not (np.all(np.isfinite(self.state)) and np.all(np.isfinite(self.next_state))):
            raise ValueError("non-finite observation entries")


@dataclass
class Batch:
    """Stacked view of a list of transitions, ready for a TD update."""

    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    state_keys: Optional[list] = None
    next_keys: Optional[list] = None

    def __len__(self) -> int:
        return len(self.indices)


class TransitionStore:
    """Append-only arena of transitions shared by every replay strategy.

    Indices are stable for the lifetime of the store. Eviction is lazy: a
    transition is *expired* once ``current_step - insert_step > capacity``;
    samplers are responsible for never emitting expired indices. Payloads of
    expired transitions may be released with :meth:`release_expired` to bound
    memory, while their insert steps (and hence expiry status) stay queryable.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.current_step = 0
        self._arena: list[Optional[Transition]] = []
        self._keys: list[Optional[tuple[StateKey, StateKey]]] = []
        self._insert_steps: list[int] = []
        self._released = 0

    def __len__(self) -> int:
        return len(self._arena)

    def append(self, t: Transition, keys: Optional[tuple[StateKey, StateKey]] = None) -> int:
        t.validate()
        if self._insert_steps and t.insert_step < self._insert_steps[-1]:
            raise ValueError("insert_step must be non-decreasing")
        self._arena.append(t)
        self._keys.append(keys)
        self._insert_steps.append(t.insert_step)
        self.current_step = t.insert_step
        return len(self._arena) - 1

    def advance(self, step: int) -> None:
        """Move the environment-step clock forward without inserting."""
        if step < self.current_step:
            raise ValueError("the step clock cannot move backwards")
        self.current_step = step

    def _check(self, idx: int) -> None:
        if not 0 <= idx < len(self._arena):
            raise IndexError(f"transition index {idx} out of range")

    def insert_step(self, idx: int) -> int:
        self._check(idx)
        return self._insert_steps[idx]

    def is_expired(self, idx: int) -> bool:
        self._check(idx)
        return self.current_step - self._insert_steps[idx] > self.capacity

    def __getitem__(self, idx: int) -> Transition:
        self._check(idx)
        t = self._arena[idx]
        if t is None:
            raise ExpiredTransitionError(f"transition {idx} was released")
        return t

    def keys(self, idx: int) -> Optional[tuple[StateKey, StateKey]]:
        self._check(idx)
        return self._keys[idx]

    def first_live(self) -> int:
        """Smallest index that is not expired (``len(self)`` if none)."""
        threshold = self.current_step - self.capacity
        return bisect.bisect_left(self._insert_steps, threshold)

    def live_range(self) -> tuple[int, int]:
        return self.first_live(), len(self._arena)

    def n_live(self) -> int:
        lo, hi = self.live_range()
        return hi - lo

    def release_expired(self) -> int:
        """Drop payloads of expired transitions; returns how many were freed."""
        lo = self.first_live()
        freed = 0
        for i in range(self._released, lo):
            if self._arena[i] is not None:
                self._arena[i] = None
                self._keys[i] = None
                freed += 1
        self._released = max(self._released, lo)
        return freed

    def batch(self, indices: Sequence[int], observations: bool = True) -> Batch:
        """Stack transitions; ``observations=False`` skips the dense arrays."""
        ts = [self[i] for i in indices]
        keys = [self._keys[i] for i in indices]
        have_keys = all(k is not None for k in keys)
        empty = np.empty((len(ts), 0))
        return Batch(
            indices=np.asarray(indices, dtype=np.int64),
            states=np.stack([t.state for t in ts]).astype(np.float64) if observations else empty,
            actions=np.fromiter((t.action for t in ts), dtype=np.int64, count=len(ts)),
            rewards=np.fromiter((t.reward for t in ts), dtype=np.float64, count=len(ts)),
            next_states=(
                np.stack([t.next_state for t in ts]).astype(np.float64) if observations else empty
            ),
            terminals=np.fromiter((t.terminal for t in ts), dtype=bool, count=len(ts)),
            state_keys=[k[0] for k in keys] if have_keys else None,
            next_keys=[k[1] for k in keys] if have_keys else None,
        )
