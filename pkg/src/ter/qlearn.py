"""Q-function representations, TD updates, target sync and exploration."""

from __future__ import annotations

import copy
import struct
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ter.core import Batch, StateKey
from ter.hashing import ProjectionMatrix


class EpsilonSchedule:
    """Linear decay from ``start`` to ``end`` over ``decay_steps`` env steps."""

    def __init__(self, start: float = 1.0, end: float = 0.01, decay_steps: int = 1_000_000):
        if not 0 <= end <= start <= 1:
            raise ValueError("need 0 <= end <= start <= 1")
        self.start = start
        self.end = end
        self.decay_steps = max(int(decay_steps), 1)

    def __call__(self, t: int) -> float:
        frac = min(max(t, 0) / self.decay_steps, 1.0)
        # convex form so both endpoints are hit exactly
        return min(self.start, max(self.end, (1.0 - frac) * self.start + frac * self.end))


class TDResult(NamedTuple):
    td_errors: np.ndarray
    q_taken: np.ndarray
    targets: np.ndarray


def huber(x: np.ndarray, delta: float = 1.0) -> np.ndarray:
    a = np.abs(x)
    return np.where(a <= delta, 0.5 * x * x, delta * (a - 0.5 * delta))


def greedy(row: np.ndarray) -> int:
    # np.argmax returns the first maximum: lowest-index tie-breaking
    return int(np.argmax(row))


def select_action(q, obs: np.ndarray, epsilon: float, rng: np.random.Generator,
                  key: Optional[StateKey] = None) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(q.n_actions))
    return greedy(q.values(obs, key))


def td_targets(batch: Batch, q, q_target, gamma: float, double: bool = True) -> np.ndarray:
    """``r + (1 - terminal) * gamma * T`` with double or vanilla-max ``T``."""
    nxt_target = q_target.values_batch(batch.next_states, batch.next_keys)
    if double:
        nxt_online = q.values_batch(batch.next_states, batch.next_keys)
        a_star = np.argmax(nxt_online, axis=1)
        boot = nxt_target[np.arange(len(batch)), a_star]
    else:
        boot = nxt_target.max(axis=1)
    return np.where(batch.terminals, batch.rewards, batch.rewards + gamma * boot)


class TabularQ:
    """Table over ``(StateKey, action)``; unseen entries read as zero.

    Batched updates use frozen targets computed before any entry changes,
    then apply ``Q(s,a) += lr * w * (y - Q(s,a))`` member by member, so a
    duplicated pair never overshoots its target.
    """

    needs_observations = False

    def __init__(self, n_actions: int, phi: Optional[ProjectionMatrix] = None, lr: float = 1.0):
        self.n_actions = int(n_actions)
        self.phi = phi
        self.lr = lr
        self.table: dict[StateKey, np.ndarray] = {}
        # rows written since the last sync; lets sync_target copy only those
        self._dirty: set[StateKey] = set()
        self._mirror_of: Optional[tuple["TabularQ", int]] = None
        self._sync_gen = 0
        self._zeros = np.zeros(self.n_actions)
        self._zeros.setflags(write=False)

    def _key(self, obs, key):
        if key is not None:
            return key
        if self.phi is None:
            raise ValueError("tabular Q needs a key or a projection")
        return self.phi.project(obs)

    def values(self, obs: Optional[np.ndarray] = None, key: Optional[StateKey] = None) -> np.ndarray:
        return self.table.get(self._key(obs, key), self._zeros).copy()

    def values_batch(self, obs: Optional[np.ndarray], keys: Optional[Sequence[StateKey]]) -> np.ndarray:
        if keys is None:
            keys = [self.phi.project(o) for o in obs]
        z = self._zeros
        get = self.table.get
        return np.array([get(k, z) for k in keys], dtype=np.float64).reshape(len(keys), self.n_actions)

    def _keys_of(self, batch: Batch) -> list:
        if batch.state_keys is not None:
            return batch.state_keys
        return [self.phi.project(o) for o in batch.states]

    def td_update(self, batch: Batch, q_target, gamma: float, weights: Optional[np.ndarray] = None,
                  double: bool = True, targets: Optional[np.ndarray] = None) -> TDResult:
        if targets is None:
            targets = td_targets(batch, self, q_target, gamma, double)
        keys = self._keys_of(batch)
        n = len(batch)
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
        q_taken = np.empty(n)
        for i, (k, a) in enumerate(zip(keys, batch.actions.tolist())):
            q_taken[i] = self.table.get(k, self._zeros)[a]
        td = targets - q_taken
        lr = self.lr
        table = self.table
        self._mirror_of = None
        dirty = self._dirty
        y_list, w_list = targets.tolist(), w.tolist()
        for i, (k, a) in enumerate(zip(keys, batch.actions.tolist())):
            row = table.get(k)
            if row is None:
                row = table[k] = np.zeros(self.n_actions)
            row[a] += lr * w_list[i] * (y_list[i] - row[a])
            dirty.add(k)
        return TDResult(td, q_taken, targets)

    def copy(self) -> "TabularQ":
        out = TabularQ(self.n_actions, self.phi, self.lr)
        out.table = {k: v.copy() for k, v in self.table.items()}
        return out

    def load_from(self, other: "TabularQ") -> None:
        self.table = {k: v.copy() for k, v in other.table.items()}
        self._mirror_of = None

    def mark_dirty(self, key: StateKey) -> None:
        """Record an external write to ``table[key]``."""
        self._dirty.add(key)
        self._mirror_of = None

    def sync_into(self, target: "TabularQ") -> None:
        """Make ``target`` an exact copy, copying only rows changed since the last sync."""
        m = target._mirror_of
        if m is not None and m[0] is self and m[1] == self._sync_gen:
            for k in self._dirty:
                target.table[k] = self.table[k].copy()
        else:
            target.load_from(self)
        self._dirty.clear()
        self._sync_gen += 1
        target._mirror_of = (self, self._sync_gen)

    def save(self, path) -> None:
        """Text format: header ``ter-tabular 1 <n_actions> <n_rows>``, then ``key_hex q...``."""
        with open(path, "w") as f:
            f.write(f"ter-tabular 1 {self.n_actions} {len(self.table)}\n")
            for k, row in self.table.items():
                f.write(k.hex() + " " + " ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path, phi: Optional[ProjectionMatrix] = None, lr: float = 1.0) -> "TabularQ":
        with open(path) as f:
            magic, version, n_actions, n_rows = f.readline().split()
            if magic != "ter-tabular" or version != "1":
                raise ValueError("not a tabular Q file")
            q = cls(int(n_actions), phi, lr)
            for _ in range(int(n_rows)):
                parts = f.readline().split()
                q.table[bytes.fromhex(parts[0])] = np.array([float(x) for x in parts[1:]])
        return q


class Adam:
    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: Optional[list] = None
        self.v: Optional[list] = None
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, lr: float = 1e-3):
        self.lr = lr

    def step(self, params, grads) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class MLPQ:
    """Fully connected ReLU network ``D -> hidden... -> n_actions``.

    Parameters are float64 ``(W, b)`` pairs with ``W`` of shape
    ``(fan_in, fan_out)``. Training minimises the weighted mean Huber loss
    of the TD error on the taken actions.
    """

    needs_observations = True

    def __init__(self, obs_dim: int, n_actions: int, hidden: Sequence[int] = (64, 64),
                 lr: float = 3e-4, optimizer: str = "adam",
                 rng: Optional[np.random.Generator] = None):
        self.obs_dim = int(obs_dim)
        self.n_actions = int(n_actions)
        self.sizes = [self.obs_dim, *map(int, hidden), self.n_actions]
        self.lr = lr
        self.optimizer_name = optimizer
        rng = np.random.default_rng(0) if rng is None else rng
        self.params: list[np.ndarray] = []
        n_layers = len(self.sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            # He-uniform for ReLU layers, a smaller range for the linear head
            bound = np.sqrt(6.0 / fan_in) if i < n_layers - 1 else np.sqrt(1.0 / fan_in)
            self.params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))
        self.optimizer = Adam(lr) if optimizer == "adam" else SGD(lr)

    # -- evaluation --------------------------------------------------------

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [x]
        h = x
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            h = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < n_layers - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def values(self, obs: np.ndarray, key: Optional[StateKey] = None) -> np.ndarray:
        return self._forward(np.asarray(obs, dtype=np.float64)[None, :])[0][0]

    def values_batch(self, obs: np.ndarray, keys=None) -> np.ndarray:
        return self._forward(np.asarray(obs, dtype=np.float64))[0]

    # -- training ----------------------------------------------------------

    def _backward(self, acts: list[np.ndarray], d_out: np.ndarray) -> list[np.ndarray]:
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        g = d_out
        for i in reversed(range(len(self.params) // 2)):
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i:
                g = (g @ self.params[2 * i].T) * (acts[i] > 0)
        return grads

    def loss_and_grads(self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray,
                       weights: Optional[np.ndarray] = None) -> tuple[float, list[np.ndarray], np.ndarray, np.ndarray]:
        """Weighted mean Huber loss, its parameter gradients, TD errors and Q(s,a)."""
        n = len(actions)
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
        out, acts = self._forward(states)
        rows = np.arange(n)
        q_taken = out[rows, actions]
        td = targets - q_taken
        loss = float(np.mean(w * huber(td)))
        d_out = np.zeros_like(out)
        d_out[rows, actions] = -w * np.clip(td, -1.0, 1.0) / n
        return loss, self._backward(acts, d_out), td, q_taken

    def td_update(self, batch: Batch, q_target, gamma: float, weights: Optional[np.ndarray] = None,
                  double: bool = True, targets: Optional[np.ndarray] = None) -> TDResult:
        if targets is None:
            targets = td_targets(batch, self, q_target, gamma, double)
        _, grads, td, q_taken = self.loss_and_grads(batch.states, batch.actions, targets, weights)
        self.optimizer.step(self.params, grads)
        return TDResult(td, q_taken, targets)

    def regress(self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """One optimiser step of squared error on taken actions; returns residuals."""
        n = len(actions)
        out, acts = self._forward(states)
        rows = np.arange(n)
        resid = targets - out[rows, actions]
        d_out = np.zeros_like(out)
        d_out[rows, actions] = -resid / n
        self.optimizer.step(self.params, self._backward(acts, d_out))
        return resid

    # -- parameter vector --------------------------------------------------

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != sum(p.size for p in self.params):
            raise ValueError("parameter vector has the wrong length")
        pos = 0
        for p in self.params:
            p[...] = flat[pos : pos + p.size].reshape(p.shape)
            pos += p.size

    def copy(self) -> "MLPQ":
        out = copy.copy(self)
        out.params = [p.copy() for p in self.params]
        out.optimizer = copy.deepcopy(self.optimizer)
        return out

    def load_from(self, other: "MLPQ") -> None:
        for p, q in zip(self.params, other.params):
            p[...] = q

    def save(self, path) -> None:
        """Binary format: one ASCII header line, then little-endian float64 params.

        Header: ``ter-mlp 1 <n_sizes> <size_0> ... <size_k> <n_params>\\n``.
        Parameters follow layer by layer, ``W`` (row-major) then ``b``.
        """
        flat = self.get_flat()
        header = f"ter-mlp 1 {len(self.sizes)} {' '.join(map(str, self.sizes))} {flat.size}\n"
        with open(path, "wb") as f:
            f.write(header.encode("ascii"))
            f.write(struct.pack(f"<{flat.size}d", *flat))

    @classmethod
    def load(cls, path, lr: float = 3e-4, optimizer: str = "adam") -> "MLPQ":
        with open(path, "rb") as f:
            parts = f.readline().decode("ascii").split()
            if parts[:2] != ["ter-mlp", "1"]:
                raise ValueError("not an MLP parameter file")
            n_sizes = int(parts[2])
            sizes = [int(x) for x in parts[3 : 3 + n_sizes]]
            n_params = int(parts[3 + n_sizes])
            flat = np.array(struct.unpack(f"<{n_params}d", f.read(8 * n_params)))
        q = cls(sizes[0], sizes[-1], sizes[1:-1], lr=lr, optimizer=optimizer)
        q.set_flat(flat)
        return q


def sync_target(q, target) -> None:
    if isinstance(q, TabularQ) and isinstance(target, TabularQ):
        q.sync_into(target)
    else:
        target.load_from(q)


def gradient_check(q: MLPQ, batch: Batch, q_target, gamma: float,
                   weights: Optional[np.ndarray] = None, n_coords: Optional[int] = 64,
                   step: float = 1e-5, rng: Optional[np.random.Generator] = None,
                   double: bool = True) -> float:
    """Max relative error between analytic and central-difference gradients.

    Targets are computed once and held fixed, as in the TD step. Relative
    error is ``|a - n| / max(|a|, |n|, 1e-8)``, so it reads 0 when both
    gradients vanish.
    """
    targets = td_targets(batch, q, q_target, gamma, double)
    _, grads, _, _ = q.loss_and_grads(batch.states, batch.actions, targets, weights)
    analytic = np.concatenate([g.ravel() for g in grads])
    theta = q.get_flat()
    rng = np.random.default_rng(0) if rng is None else rng
    if n_coords is None or n_coords >= theta.size:
        coords = np.arange(theta.size)
    else:
        coords = rng.choice(theta.size, size=n_coords, replace=False)
    worst = 0.0
    try:
        for c in coords:
            orig = theta[c]
            theta[c] = orig + step
            q.set_flat(theta)
            lp = q.loss_and_grads(batch.states, batch.actions, targets, weights)[0]
            theta[c] = orig - step
            q.set_flat(theta)
            lm = q.loss_and_grads(batch.states, batch.actions, targets, weights)[0]
            theta[c] = orig
            numeric = (lp - lm) / (2 * step)
            a = analytic[c]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    finally:
        q.set_flat(theta)
    return worst
