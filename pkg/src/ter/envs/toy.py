from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ter.envs.base import Env, EnvStep, EpisodeOverError, TabularModel


class GraphMDP(Env):
    """Deterministic MDP given as a successor list per state.

    Action ``i`` in state ``s`` moves along the ``i``-th listed edge of ``s``;
    an action beyond the listed edges leaves the state unchanged with reward
    0, and the model marks it unavailable so the oracle ignores it. Entering
    a state in ``terminals`` ends the episode. ``rewards`` maps an
    edge ``(s, s')`` to its reward (default 0). Observations are one-hot over
    the listed states in order.
    """

    def __init__(
        self,
        successors: Mapping[str, Sequence[str]],
        terminals: Sequence[str],
        rewards: Mapping[tuple[str, str], float],
        starts: Sequence[str],
        max_steps: int = 100,
    ):
        names = list(successors)
        for ss in successors.values():
            names.extend(s for s in ss if s not in names)
        self.names = names
        self.successors = {s: list(successors.get(s, ())) for s in names}
        self.terminals = set(terminals)
        self.rewards = dict(rewards)
        self.starts = list(starts)
        self.n_actions = max(len(v) for v in self.successors.values())
        self.obs_dim = len(names)
        self.max_steps = max_steps
        self.state = self.starts[0]
        self.steps = 0
        self.done = True

    @property
    def return_bounds(self) -> tuple[float, float]:
        r = list(self.rewards.values()) or [0.0]
        return min(0.0, min(r)), max(1e-12, max(r))

    def observe(self, state: str) -> np.ndarray:
        obs = np.zeros(self.obs_dim, dtype=np.uint8)
        obs[self.names.index(state)] = 1
        return obs

    def edges(self) -> list[tuple[str, int, float, str, bool]]:
        """Every (s, a, r, s', terminal) of the MDP."""
        return [
            (s, a, self.rewards.get((s, t), 0.0), t, t in self.terminals)
            for s in self.names
            for a, t in enumerate(self.successors[s])
        ]

    def _move(self, s: str, a: int) -> tuple[str, float]:
        options = self.successors[s]
        if a >= len(options):
            return s, 0.0
        return options[a], self.rewards.get((s, options[a]), 0.0)

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        i = 0 if rng is None or len(self.starts) == 1 else int(rng.integers(len(self.starts)))
        self.state = self.starts[i]
        self.steps = 0
        self.done = False
        return self.observe(self.state)

    def step(self, action: int) -> EnvStep:
        if self.done:
            raise EpisodeOverError("step after the episode ended")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"invalid action {action}")
        nxt, r = self._move(self.state, action)
        self.state = nxt
        self.steps += 1
        terminal = nxt in self.terminals
        timeout = not terminal and self.steps >= self.max_steps
        self.done = terminal or timeout
        return EnvStep(self.observe(nxt), r, terminal, timeout)

    def model(self) -> TabularModel:
        def outcomes(s, a):
            t, r = self._move(s, a)
            return [(1.0, t, r, t in self.terminals)]

        states = [s for s in self.names if s not in self.terminals and self.successors[s]]
        return TabularModel(states, self.n_actions, outcomes, self.observe,
                            valid_actions=lambda s: range(len(self.successors[s])))


def six_state_mdp() -> GraphMDP:
    """Two trajectories A-E-B-D-G and C-D-G joined at D, plus the shortcut E-G.

    Entering the goal G pays 1. Replaying the first trajectory backwards
    misses C, the other predecessor of D.
    """
    return GraphMDP(
        successors={"A": ["E"], "E": ["B", "G"], "B": ["D"], "C": ["D"], "D": ["G"], "G": []},
        terminals=["G"],
        rewards={("D", "G"): 1.0, ("E", "G"): 1.0},
        starts=["A", "C"],
    )
