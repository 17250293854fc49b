from __future__ import annotations

import numpy as np

from ter.envs.base import Env, EnvStep, TabularModel


class StochasticWrapper(Env):
    """Replaces the chosen action by a uniform random one with probability ``p``.

    The wrapper owns its generator. With ``p == 0`` it draws nothing, so the
    wrapped environment behaves bit-identically to the bare one.
    """

    def __init__(self, inner: Env, p: float = 0.1, rng: np.random.Generator | None = None):
        if not 0.0 <= p <= 1.0:
            raise ValueError("corruption probability must lie in [0, 1]")
        self.inner = inner
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.n_actions = inner.n_actions
        self.obs_dim = inner.obs_dim
        self.max_steps = inner.max_steps
        self.n_corrupted = 0

    def __getattr__(self, name):
        # only called for attributes not found on the wrapper itself
        if name == "inner":
            raise AttributeError(name)
        return getattr(self.inner, name)

    @property
    def return_bounds(self) -> tuple[float, float]:
        return self.inner.return_bounds

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return self.inner.reset(rng)

    def step(self, action: int) -> EnvStep:
        if self.p > 0.0 and self.rng.random() < self.p:
            action = int(self.rng.integers(self.n_actions))
            self.n_corrupted += 1
        return self.inner.step(action)

    def model(self) -> TabularModel:
        base = self.inner.model()
        p, n = self.p, base.n_actions

        def outcomes(state, a):
            out = [((1.0 - p) * pr, s, r, t) for pr, s, r, t in base.outcomes(state, a)]
            if p > 0.0:
                for b in range(n):
                    out.extend((p / n * pr, s, r, t) for pr, s, r, t in base.outcomes(state, b))
            return out

        return TabularModel(base.states, n, outcomes, base.observe)
