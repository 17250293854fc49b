"""Training loops: online interaction with warm-up, and fixed-dataset replay."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from ter.baselines import (
    EBUReplay,
    EpisodeBuffer,
    ErrorModel,
    LinearSchedule,
    PrioritizedReplay,
    UniformReplay,
)
from ter.config import ExperimentConfig
from ter.core import Transition, TransitionStore
from ter.envs import Env, OptimalQ, StochasticWrapper, make_env, optimal_q
from ter.graph import TopologicalGraph
from ter.harness.evaluate import evaluate
from ter.harness.records import RunRecord
from ter.hashing import ProjectionMatrix
from ter.qlearn import EpsilonSchedule, MLPQ, TabularQ, select_action, sync_target
from ter.sweep import ReverseSweep, mixed_batch

STREAMS = ("env", "explore", "sampler", "projection", "init", "stochastic", "eval")


def seed_sequences(seed: int) -> dict[str, np.random.SeedSequence]:
    return dict(zip(STREAMS, np.random.SeedSequence(seed).spawn(len(STREAMS))))


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per subsystem, all derived from ``seed``."""
    return {name: np.random.default_rng(ss) for name, ss in seed_sequences(seed).items()}


def updates_due(replay_ratio: float, warmup_steps: int, total_steps: int) -> int:
    """Exact number of gradient updates an online run performs."""
    ratio = Fraction(repr(float(replay_ratio)))
    return int(ratio * max(total_steps - warmup_steps, 0))


@dataclass
class BatchAudit:
    """Per-update source bookkeeping for mixed batches."""

    n_per: list[int] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    starved: list[bool] = field(default_factory=list)


class Learner:
    """Q-function, target network, replay structures and the sampler dispatch."""

    def __init__(self, cfg: ExperimentConfig, env: Env, rngs: dict[str, np.random.Generator],
                 store_capacity: Optional[int] = None):
        self.cfg = cfg
        self.env = env
        self.rng = rngs["sampler"]
        self.phi = ProjectionMatrix(env.obs_dim, cfg.projection_dim, seed=rngs["projection"])
        if cfg.learner == "tabular":
            self.q = TabularQ(env.n_actions, self.phi, cfg.lr)
        else:
            self.q = MLPQ(env.obs_dim, env.n_actions, cfg.hidden, cfg.lr, cfg.optimizer, rngs["init"])
        self.q_target = self.q.copy()
        self.store = TransitionStore(store_capacity or cfg.capacity)
        s = cfg.sampler
        self.graph = self.sweep = self.per = self.episodes = self.ebu = self.discor = None
        self.uniform = UniformReplay(self.store)
        if s in ("ter", "ter_mixed"):
            self.graph = TopologicalGraph(cfg.weighted_predecessors)
            self.sweep = ReverseSweep(
                self.graph, self.store, self.rng, cfg.root_budget, cfg.pred_budget,
                cfg.per_edge_budget, cfg.roots_mode, cfg.kappa,
            )
        if s in ("per", "ter_mixed"):
            horizon = cfg.n_updates if cfg.mode == "offline" else cfg.total_steps
            beta = LinearSchedule(cfg.per_beta, 1.0, max(horizon // 4, 1))
            self.per = PrioritizedReplay(self.store, cfg.per_alpha, beta, cfg.per_eps)
        if s == "ebu":
            self.episodes = EpisodeBuffer(self.store, cfg.ebu_timeout_episodes)
            self.ebu = EBUReplay(self.episodes, cfg.ebu_beta, cfg.double)
        if s == "discor":
            if cfg.learner == "tabular":
                self.discor = ErrorModel.tabular(env.n_actions, self.phi, lr=cfg.discor_lr,
                                                 temperature=cfg.discor_temperature,
                                                 normalize=cfg.discor_normalize)
            else:
                self.discor = ErrorModel.network(env.obs_dim, env.n_actions, cfg.hidden, cfg.lr,
                                                 rngs["init"], temperature=cfg.discor_temperature,
                                                 normalize=cfg.discor_normalize)
        self.n_updates = 0
        self.starvation = 0
        self.audit = BatchAudit()
        self._q_sum = 0.0
        self._q_n = 0
        self._last_mean_q = 0.0

    def key(self, obs: np.ndarray) -> bytes:
        return self.phi.project(obs)

    def insert(self, t: Transition, keys: tuple[bytes, bytes]) -> int:
        idx = self.store.append(t, keys)
        if self.graph is not None:
            self.graph.insert_transition(idx, t, keys=keys)
        if self.per is not None:
            self.per.add(idx)
        if self.episodes is not None:
            self.episodes.add(idx, t.terminal, t.timeout)
        return idx

    def accumulate(self, g: float, disc: float, r: float) -> tuple[float, float]:
        """Return-so-far after reward ``r``; ``disc`` is the running discount."""
        if self.cfg.discounted_vertex_returns:
            return g + disc * r, disc * self.cfg.gamma
        return g + r, disc

    def record_return(self, key: bytes, g: float) -> None:
        if self.graph is not None:
            self.graph.update_vertex_return(key, g)

    def housekeeping(self) -> None:
        """Free expired payloads; full graph prune when it holds too many transitions."""
        if self.graph is not None and self.graph.transition_count > 2 * self.store.capacity:
            self.graph.prune_all(self.store)
        self.store.release_expired()

    def _sample(self, B: int):
        """Indices, IS weights, precomputed targets and PER mask for one update."""
        cfg = self.cfg
        weights = targets = per_mask = None
        s = cfg.sampler
        if s == "uer" or s == "discor":
            idx = self.uniform.sample(B, self.rng)
        elif s == "per":
            idx, weights = self.per.sample(B, self.rng)
            per_mask = np.ones(len(idx), dtype=bool)
        elif s == "ter":
            idx = self.sweep.sample(B)
            if idx is None:
                self.starvation += 1
                idx = self.uniform.sample(B, self.rng)
        elif s == "ter_mixed":
            mb = mixed_batch(self.sweep, self.per, cfg.eta, B, self.rng)
            idx, weights, per_mask = mb.indices, mb.weights, mb.from_per
            self.starvation += int(mb.starved)
            self.audit.n_per.append(int(mb.from_per.sum()))
            self.audit.sizes.append(len(idx))
            self.audit.starved.append(mb.starved)
        else:  # ebu
            if self.episodes.n_eligible() == 0 and self.ebu.pending() == 0:
                idx = self.uniform.sample(B, self.rng)
            else:
                idx, targets = self.ebu.sample(B, self.q, self.q_target, cfg.gamma, self.rng,
                                               self.q.needs_observations)
                if not idx:
                    idx, targets = self.uniform.sample(B, self.rng), None
        return idx, weights, targets, per_mask

    def update(self) -> None:
        cfg = self.cfg
        idx, weights, targets, per_mask = self._sample(cfg.batch_size)
        batch = self.store.batch(idx, observations=self.q.needs_observations)
        a_next = None
        if self.discor is not None:
            weights, a_next = self.discor.weights(batch, self.q, cfg.gamma)
        res = self.q.td_update(batch, self.q_target, cfg.gamma, weights, cfg.double, targets)
        if self.discor is not None:
            self.discor.train(batch, res.td_errors, a_next, cfg.gamma)
        if self.per is not None and per_mask is not None and per_mask.any():
            sel = np.flatnonzero(per_mask)
            self.per.update_priorities(np.asarray(idx)[sel], res.td_errors[sel])
        self._q_sum += float(res.q_taken.sum())
        self._q_n += len(res.q_taken)
        self.n_updates += 1
        if self.per is not None:
            self.per.step = self.n_updates if cfg.mode == "offline" else self.store.current_step
        if self.n_updates % cfg.target_update_interval == 0:
            sync_target(self.q, self.q_target)
            if self.discor is not None:
                self.discor.sync()

    def take_mean_q(self) -> float:
        """Mean Q over training-batch members since the last call (last value if none)."""
        if self._q_n:
            self._last_mean_q = self._q_sum / self._q_n
        self._q_sum, self._q_n = 0.0, 0
        return self._last_mean_q


class Run:
    """Shared state of one seeded run: environments, learner, oracle, eval."""

    def __init__(self, cfg: ExperimentConfig, store_capacity: Optional[int] = None):
        cfg.validate()
        self.cfg = cfg
        self.rngs = rng_streams(cfg.seed)
        self._eval_root = seed_sequences(cfg.seed)["eval"]
        self.env = make_env(cfg.env, self.rngs["stochastic"])
        self.eval_env = make_env(cfg.env)
        self.learner = Learner(cfg, self.env, self.rngs, store_capacity)
        self.oracle: Optional[OptimalQ] = None
        self._oracle_keys = None
        if cfg.value_error != "off" and self._enumerable():
            self.oracle = optimal_q(self.oracle_env(), cfg.gamma)
            self._oracle_keys = [self.learner.phi.project(o) for o in self.oracle.observations]
        elif cfg.value_error == "on":
            raise ValueError(f"{cfg.env} has no fixed enumerable model for value error")
        self.r_max = self.env.r_max

    def _enumerable(self) -> bool:
        name = self.cfg.env.split(":")[0].lower()
        return name in ("nchain", "sixstate") or ":layout=" in self.cfg.env.lower()

    def oracle_env(self) -> Env:
        env = make_env(self.cfg.env, np.random.default_rng(0))
        env.reset(np.random.default_rng(0))  # grids need a layout; pinned by layout=<seed>
        return env

    def value_error(self) -> Optional[float]:
        if self.oracle is None:
            return None
        return self.oracle.value_error(self.learner.q, self._oracle_keys)

    def record(self, env_step: int, episodes: int) -> RunRecord:
        cfg = self.cfg
        # the k-th evaluation always sees the same layouts and noise, whatever the sampler
        policy_ss, noise_ss = self._eval_root.spawn(1)[0].spawn(2)
        if isinstance(self.eval_env, StochasticWrapper):
            self.eval_env.rng = np.random.default_rng(noise_ss)
        ret = evaluate(self.learner.q, self.eval_env, episodes, cfg.eval_random_prob,
                       np.random.default_rng(policy_ss))
        mean_q = self.learner.take_mean_q()
        r_max = self.r_max if self.r_max != 0 else 1.0
        return RunRecord(
            env_step=env_step,
            updates=self.learner.n_updates,
            normalized_return=ret,
            mean_q=mean_q,
            q_diff_normalized=(mean_q - r_max) / abs(r_max),
            value_error=self.value_error(),
            starvation=self.learner.starvation,
            seed=cfg.seed,
        )


def train(cfg: ExperimentConfig, run: Optional[Run] = None) -> Iterator[RunRecord]:
    """Online loop: act, store, insert into the graph; update at ``replay_ratio`` past warm-up.

    Env steps are counted from 1. Step ``t`` earns ``replay_ratio`` update
    credit when ``t > warmup_steps``; whole credits are spent immediately
    (exact rational arithmetic), so a run performs
    ``floor(replay_ratio * (total_steps - warmup_steps))`` updates. Actions
    are uniform for ``t <= warmup_steps`` and epsilon-greedy afterwards,
    with epsilon decaying from the end of warm-up. Evaluation happens when
    ``(t - warmup_steps)`` is a positive multiple of ``eval_interval`` and
    at the final step.
    """
    if cfg.mode != "online":
        raise ValueError("train() runs online configs; use train_offline()")
    run = run or Run(cfg)
    lr = run.learner
    env = run.env
    rng_env, rng_act = run.rngs["env"], run.rngs["explore"]
    eps = EpsilonSchedule(cfg.eps_start, cfg.eps_end, cfg.eps_decay_steps)
    ratio = Fraction(repr(float(cfg.replay_ratio)))
    credit = Fraction(0)
    final_episodes = cfg.final_eval_episodes or cfg.eval_episodes
    obs = None
    key = None
    g = disc = 0.0
    for t in range(1, cfg.total_steps + 1):
        if obs is None:
            obs = env.reset(rng_env)
            key = lr.key(obs)
            g, disc = 0.0, 1.0
            lr.record_return(key, g)
        if t <= cfg.warmup_steps:
            action = int(rng_act.integers(env.n_actions))
        else:
            action = select_action(lr.q, obs, eps(t - cfg.warmup_steps), rng_act, key)
        step = env.step(action)
        next_key = lr.key(step.obs)
        tr = Transition(obs, action, float(step.reward), step.obs, bool(step.terminal),
                        bool(step.timeout), t)
        lr.insert(tr, (key, next_key))
        g, disc = lr.accumulate(g, disc, step.reward)
        lr.record_return(next_key, g)
        if step.terminal or step.timeout:
            obs = None
        else:
            obs, key = step.obs, next_key
        if t > cfg.warmup_steps:
            credit += ratio
            while credit >= 1:
                lr.update()
                credit -= 1
            lr.housekeeping()
        since = t - cfg.warmup_steps
        if t == cfg.total_steps:
            yield run.record(t, final_episodes)
        elif since > 0 and since % cfg.eval_interval == 0:
            yield run.record(t, cfg.eval_episodes)


Episode = list[tuple[np.ndarray, int, float, np.ndarray, bool, bool]]


def collect_random_dataset(env: Env, n_episodes: int, rng: np.random.Generator) -> list[Episode]:
    """``n_episodes`` uniform-random-policy episodes, each ended by terminal or timeout."""
    data: list[Episode] = []
    for _ in range(n_episodes):
        obs = env.reset(rng)
        ep: Episode = []
        while True:
            a = int(rng.integers(env.n_actions))
            st = env.step(a)
            ep.append((obs, a, float(st.reward), st.obs, bool(st.terminal), bool(st.timeout)))
            obs = st.obs
            if st.terminal or st.timeout:
                break
        data.append(ep)
    return data


def train_offline(cfg: ExperimentConfig, dataset: Optional[list[Episode]] = None,
                  n_updates: Optional[int] = None) -> Iterator[RunRecord]:
    """Replay a fixed dataset: ``n_updates`` sampled batches, evaluation after each.

    The dataset (random-policy episodes drawn from the ``env`` stream when
    not given) is inserted with insert steps ``1..N`` into a store large
    enough that nothing expires. A row at update 0 precedes the first
    update. ``env_step`` stays at ``N`` throughout.
    """
    n_updates = cfg.n_updates if n_updates is None else n_updates
    rngs = rng_streams(cfg.seed)
    if dataset is None:
        dataset = collect_random_dataset(make_env(cfg.env, rngs["stochastic"]),
                                         cfg.dataset_episodes, rngs["env"])
    size = sum(len(ep) for ep in dataset)
    run = Run(cfg, store_capacity=max(cfg.capacity, size))
    lr = run.learner
    t = 0
    for ep in dataset:
        g, disc = 0.0, 1.0
        for k, (s, a, r, s2, term, tout) in enumerate(ep):
            t += 1
            key, next_key = lr.key(s), lr.key(s2)
            if k == 0:
                lr.record_return(key, 0.0)
            lr.insert(Transition(s, a, r, s2, term, tout, t), (key, next_key))
            g, disc = lr.accumulate(g, disc, r)
            lr.record_return(next_key, g)
    yield run.record(t, cfg.eval_episodes)
    for _ in range(n_updates):
        lr.update()
        yield run.record(t, cfg.eval_episodes)
