"""Value iteration over an environment's enumerable model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable

import numpy as np

from ter.envs.base import Env, TabularModel


@dataclass
class OptimalQ:
    states: list[Hashable]
    observations: np.ndarray  # (S, D), row i observes states[i]
    q: np.ndarray  # (S, A); -inf where an action is unavailable
    iterations: int
    valid: np.ndarray  # (S, A) bool

    def index(self, state: Hashable) -> int:
        return self.states.index(state)

    def __getitem__(self, item: tuple[Hashable, int]) -> float:
        state, a = item
        return float(self.q[self.index(state), a])

    def values_of(self, qfunc, keys=None) -> np.ndarray:
        """``qfunc``'s estimates on every enumerated (state, action)."""
        if keys is None and getattr(qfunc, "phi", None) is not None:
            keys = [qfunc.phi.project(o) for o in self.observations]
        return qfunc.values_batch(self.observations.astype(np.float64), keys)

    def value_error(self, qfunc, keys=None) -> float:
        """Mean absolute deviation of ``qfunc`` from Q* over all state-action pairs."""
        diff = self.values_of(qfunc, keys)[self.valid] - self.q[self.valid]
        return float(np.mean(np.abs(diff)))


def solve_model(model: TabularModel, gamma: float, tol: float = 1e-10,
                max_iter: int = 1_000_000) -> OptimalQ:
    """Iterate the Bellman optimality operator until the sup-norm change is below ``tol``.

    Terminal outcomes and successors outside ``model.states`` contribute no
    bootstrap value. Timeouts are ignored: the oracle values the
    infinite-horizon task.
    """
    states = list(model.states)
    index = {s: i for i, s in enumerate(states)}
    n_s, n_a = len(states), model.n_actions
    valid = np.ones((n_s, n_a), dtype=bool)
    rows: list[list] = []
    k_max = 1
    for i, s in enumerate(states):
        if model.valid_actions is not None:
            valid[i] = False
            valid[i, list(model.valid_actions(s))] = True
        for a in range(n_a):
            outs = model.outcomes(s, a) if valid[i, a] else []
            rows.append(outs)
            k_max = max(k_max, len(outs))
    nxt = np.full((n_s * n_a, k_max), n_s, dtype=np.int64)  # n_s = absorbing zero
    prob = np.zeros((n_s * n_a, k_max))
    rew = np.zeros((n_s * n_a, k_max))
    for i, outs in enumerate(rows):
        for k, (p, s_next, r, terminal) in enumerate(outs):
            prob[i, k] = p
            rew[i, k] = r
            if not terminal:
                nxt[i, k] = index.get(s_next, n_s)
    expected_r = (prob * rew).sum(axis=1)
    mask = valid.reshape(-1)
    q = np.where(mask, 0.0, -np.inf)
    v = np.zeros(n_s + 1)
    it = 0
    for it in range(1, max_iter + 1):
        v[:n_s] = q.reshape(n_s, n_a).max(axis=1)
        q_new = np.where(mask, expected_r + gamma * (prob * v[nxt]).sum(axis=1), -np.inf)
        delta = np.max(np.abs(q_new[mask] - q[mask])) if mask.any() else 0.0
        q = q_new
        if delta < tol:
            break
    else:
        raise RuntimeError(f"value iteration did not converge in {max_iter} sweeps")
    obs = np.array([model.observe(s) for s in states]) if states else np.zeros((0, 0))
    return OptimalQ(states, obs, q.reshape(n_s, n_a), it, valid)


def optimal_q(env: Env, gamma: float, tol: float = 1e-10) -> OptimalQ:
    """Exact Q* for ``env`` (for grids: the current layout)."""
    return solve_model(env.model(), gamma, tol)
