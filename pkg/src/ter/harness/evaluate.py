from __future__ import annotations

import numpy as np

from ter.envs import Env
from ter.qlearn import select_action


def run_episode(q, env: Env, random_prob: float, rng: np.random.Generator) -> float:
    """Undiscounted return of one episode under epsilon-greedy ``q``."""
    obs = env.reset(rng)
    g = 0.0
    while True:
        st = env.step(select_action(q, obs, random_prob, rng))
        g += st.reward
        if st.terminal or st.timeout:
            return g
        obs = st.obs


def evaluate(q, env: Env, episodes: int, random_prob: float, rng: np.random.Generator) -> float:
    """Mean min-max normalised return over ``episodes`` greedy(ish) episodes."""
    total = 0.0
    for _ in range(episodes):
        total += env.normalize_return(run_episode(q, env, random_prob, rng))
    return total / episodes


class RandomPolicy:
    """Stands in for a Q-function whose greedy action is always random."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions


def random_policy_return(env: Env, episodes: int, rng: np.random.Generator) -> float:
    """Mean normalised return of the uniform random policy."""
    return evaluate(RandomPolicy(env.n_actions), env, episodes, 1.0, rng)
