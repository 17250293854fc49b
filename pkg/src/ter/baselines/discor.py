"""DisCor-style reweighting of TD updates by an estimated bootstrapping error."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ter.core import Batch
from ter.qlearn import MLPQ, TabularQ


class ErrorModel:
    """Estimator ``Delta(s, a)`` of accumulated bootstrapping error.

    Backed by a :class:`TabularQ` table or an :class:`MLPQ` network; reads
    are clipped at zero. A frozen copy serves the recursive training target
    and is refreshed together with the Q target network, at which point the
    temperature is reset to the mean prediction seen since the last sync.
    """

    def __init__(self, model, temperature: float = 10.0, lr: float = 1.0,
                 normalize: bool = True):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.model = model
        self.target = model.copy()
        self.temperature = float(temperature)
        self.lr = lr
        self.normalize = normalize
        self._pred_sum = 0.0
        self._pred_n = 0

    @classmethod
    def tabular(cls, n_actions: int, phi=None, **kw) -> "ErrorModel":
        return cls(TabularQ(n_actions, phi, lr=kw.pop("lr", 1.0)), **kw)

    @classmethod
    def network(cls, obs_dim: int, n_actions: int, hidden=(64, 64), lr: float = 3e-4,
                rng: Optional[np.random.Generator] = None, **kw) -> "ErrorModel":
        hidden = tuple(hidden) + (hidden[-1],) if hidden else (64,)
        return cls(MLPQ(obs_dim, n_actions, hidden, lr=lr, rng=rng), lr=lr, **kw)

    def predict(self, obs, keys, actions, target: bool = False) -> np.ndarray:
        m = self.target if target else self.model
        vals = m.values_batch(obs, keys)
        return np.maximum(vals[np.arange(len(actions)), actions], 0.0)

    def weights(self, batch: Batch, q, gamma: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample weights ``exp(-gamma * Delta(s', a') / tau)`` and greedy ``a'``.

        Terminal successors contribute zero error. Weights are normalised to
        mean one over the batch when ``normalize`` is set.
        """
        a_next = np.argmax(q.values_batch(batch.next_states, batch.next_keys), axis=1)
        err = self.predict(batch.next_states, batch.next_keys, a_next)
        err = np.where(batch.terminals, 0.0, err)
        self._pred_sum += float(err.sum())
        self._pred_n += len(err)
        logits = -gamma * err / self.temperature
        if self.normalize:
            w = np.exp(logits - logits.max())
            w = w / w.mean()
        else:
            w = np.exp(logits)
        return w, a_next

    def train(self, batch: Batch, td_errors: np.ndarray, a_next: np.ndarray, gamma: float) -> np.ndarray:
        """Move ``Delta(s, a)`` toward ``|td| + gamma * Delta_target(s', a')``."""
        succ = self.predict(batch.next_states, batch.next_keys, a_next, target=True)
        y = np.abs(td_errors) + np.where(batch.terminals, 0.0, gamma * succ)
        m = self.model
        if isinstance(m, TabularQ):
            keys = batch.state_keys
            if keys is None:
                keys = [m.phi.project(o) for o in batch.states]
            for k, a, yi in zip(keys, batch.actions.tolist(), y.tolist()):
                row = m.table.get(k)
                if row is None:
                    row = m.table[k] = np.zeros(m.n_actions)
                row[a] += self.lr * (yi - row[a])
                m.mark_dirty(k)
        else:
            m.regress(batch.states, batch.actions, y)
        return y

    def sync(self) -> None:
        self.target.load_from(self.model)
        if self._pred_n:
            mean = self._pred_sum / self._pred_n
            if mean > 1e-8:
                self.temperature = mean
        self._pred_sum = 0.0
        self._pred_n = 0
