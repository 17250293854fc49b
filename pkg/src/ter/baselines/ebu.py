"""Episodic backward update: one sampled episode, targets built back to front."""

from __future__ import annotations

from collections import deque

import numpy as np

from ter.core import Batch, TransitionStore


def episode_targets(batch: Batch, q, q_target, gamma: float, beta: float,
                    double: bool = True) -> np.ndarray:
    """Backward targets for one episode stored in step order.

    Walking from the last step to the first, the successor's value for the
    action actually taken next is replaced by the diffused
    ``beta * y_next + (1 - beta) * Q(s', a')`` before bootstrapping, so a
    reward propagates through the whole episode in one pass. Vanilla mode
    bootstraps from the max of the modified target row. Double mode applies
    the same substitution to the online row, picks its argmax and reads the
    modified target row there. With ``beta = 0`` every target equals the
    ordinary one-step target of the chosen mode.
    """
    n = len(batch)
    nxt_target = q_target.values_batch(batch.next_states, batch.next_keys).copy()
    nxt_online = None
    if double:
        nxt_online = q.values_batch(batch.next_states, batch.next_keys).copy()
    rewards = batch.rewards.tolist()
    actions = batch.actions.tolist()
    terminals = batch.terminals.tolist()
    y = np.empty(n)
    for k in range(n - 1, -1, -1):
        row = nxt_target[k]
        if k < n - 1:
            a_next = actions[k + 1]
            row[a_next] = beta * y[k + 1] + (1.0 - beta) * row[a_next]
            if double:
                on = nxt_online[k]
                on[a_next] = beta * y[k + 1] + (1.0 - beta) * on[a_next]
        if terminals[k]:
            y[k] = rewards[k]
        else:
            boot = row[int(np.argmax(nxt_online[k]))] if double else row.max()
            y[k] = rewards[k] + gamma * boot
    return y


class EpisodeBuffer:
    """Completed episodes as ordered lists of transition indices.

    Episodes close on a terminal or timeout transition. With
    ``include_timeout_roots=False`` only terminal-ending episodes are
    eligible for replay. Episodes containing an expired transition are
    dropped lazily.
    """

    def __init__(self, store: TransitionStore, include_timeout_roots: bool = True):
        self.store = store
        self.include_timeout_roots = include_timeout_roots
        self._current: list[int] = []
        self._episodes: deque[tuple[list[int], bool]] = deque()  # (indices, ended_terminal)
        self._eligible: deque[list[int]] = deque()

    def add(self, idx: int, terminal: bool, timeout: bool) -> None:
        self._current.append(idx)
        if terminal or timeout:
            ep = self._current
            self._current = []
            self._episodes.append((ep, terminal))
            if terminal or self.include_timeout_roots:
                self._eligible.append(ep)

    def end_episode(self) -> None:
        """Discard an unfinished episode (e.g. at a dataset boundary)."""
        self._current = []

    def _expire(self) -> None:
        while self._eligible and self.store.is_expired(self._eligible[0][0]):
            self._eligible.popleft()
        while self._episodes and self.store.is_expired(self._episodes[0][0][0]):
            self._episodes.popleft()

    def episodes(self) -> list[list[int]]:
        self._expire()
        return [ep for ep, _ in self._episodes]

    def n_eligible(self) -> int:
        self._expire()
        return len(self._eligible)

    def sample_episode(self, rng: np.random.Generator) -> list[int]:
        self._expire()
        if not self._eligible:
            raise ValueError("no eligible episodes to replay")
        return self._eligible[int(rng.integers(len(self._eligible)))]


class EBUReplay:
    """Serves an episode's backward targets in reverse order, ``B`` at a time.

    Targets for the whole episode are computed with the target network at
    the moment the episode is drawn; the following minibatches consume them
    from the last step backwards until the episode is exhausted.
    """

    def __init__(self, episodes: EpisodeBuffer, beta: float = 0.5, double: bool = True):
        self.episodes = episodes
        self.beta = beta
        self.double = double
        self._pending_idx: list[int] = []
        self._pending_y: list[float] = []

    def episode_batch(self, q, q_target, gamma: float, rng: np.random.Generator,
                      observations: bool = True) -> tuple[list[int], np.ndarray]:
        """One sampled episode: indices in reverse step order and their targets."""
        ep = self.episodes.sample_episode(rng)
        batch = self.episodes.store.batch(ep, observations=observations)
        y = episode_targets(batch, q, q_target, gamma, self.beta, self.double)
        return ep[::-1], y[::-1].copy()

    def sample(self, batch_size: int, q, q_target, gamma: float, rng: np.random.Generator,
               observations: bool = True) -> tuple[list[int], np.ndarray]:
        if not self._pending_idx:
            idx, y = self.episode_batch(q, q_target, gamma, rng, observations)
            self._pending_idx, self._pending_y = idx, y.tolist()
        idx = self._pending_idx[:batch_size]
        y = self._pending_y[:batch_size]
        del self._pending_idx[:batch_size]
        del self._pending_y[:batch_size]
        store = self.episodes.store
        keep = [i for i, t in enumerate(idx) if not store.is_expired(t)]
        return [idx[i] for i in keep], np.array([y[i] for i in keep])

    def pending(self) -> int:
        return len(self._pending_idx)
