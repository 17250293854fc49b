from __future__ import annotations

import numpy as np

from ter.envs.base import Env, EnvStep, EpisodeOverError, TabularModel


class NChainEnv(Env):
    """Chain ``s_1 ... s_N``; +1 for the ``s_{N-1} -> s_N`` step, which ends the episode.

    ``backward`` at ``s_1`` is a no-op. By default action 0 is ``backward``
    and action 1 ``forward``, so a greedy policy with lowest-index
    tie-breaking over an untrained (all-zero) Q walks away from the goal;
    ``forward_first=True`` swaps the ids. Observations are one-hot of length
    ``N``; positions are 1-based.
    """

    def __init__(self, n: int = 20, max_steps: int | None = None, forward_first: bool = False):
        if n < 2:
            raise ValueError("chain needs at least two states")
        self.n = n
        self.n_actions = 2
        self.obs_dim = n
        self.max_steps = 10 * n if max_steps is None else max_steps
        self.forward = 0 if forward_first else 1
        self.backward = 1 - self.forward
        self.pos = 1
        self.steps = 0
        self.done = True

    @property
    def return_bounds(self) -> tuple[float, float]:
        return 0.0, 1.0

    def observe(self, pos: int) -> np.ndarray:
        obs = np.zeros(self.n, dtype=np.uint8)
        obs[pos - 1] = 1
        return obs

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        self.pos = 1
        self.steps = 0
        self.done = False
        return self.observe(self.pos)

    def _move(self, pos: int, action: int) -> tuple[int, float, bool]:
        if action == self.forward:
            nxt = pos + 1
        elif action == self.backward:
            nxt = max(pos - 1, 1)
        else:
            raise ValueError(f"invalid action {action}")
        reached = nxt == self.n
        return nxt, (1.0 if reached else 0.0), reached

    def step(self, action: int) -> EnvStep:
        if self.done:
            raise EpisodeOverError("step after the episode ended")
        self.pos, reward, terminal = self._move(self.pos, int(action))
        self.steps += 1
        timeout = not terminal and self.steps >= self.max_steps
        self.done = terminal or timeout
        return EnvStep(self.observe(self.pos), reward, terminal, timeout)

    def model(self) -> TabularModel:
        def outcomes(pos, a):
            nxt, r, term = self._move(pos, a)
            return [(1.0, nxt, r, term)]

        return TabularModel(list(range(1, self.n)), 2, outcomes, self.observe)
