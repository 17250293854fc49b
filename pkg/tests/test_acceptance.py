"""Acceptance criteria 1-12, one test each; every test prints a PASS/FAIL line."""

import math
from collections import Counter
from functools import lru_cache

import numpy as np
import pytest
from scipy import stats

from ter.baselines import PrioritizedReplay, SumTree, episode_targets
from ter.config import ExperimentConfig
from ter.core import Batch, Transition, TransitionStore
from ter.envs import six_state_mdp, solve_model
from ter.graph import TopologicalGraph, parse_dump
from ter.harness import emit, train, train_offline
from ter.harness.loop import Run
from ter.qlearn import MLPQ, TabularQ, gradient_check, sync_target, td_targets
from ter.sweep import ReverseSweep, mixed_batch, per_share

from conftest import make_transition

SEEDS = range(5)


def verdict(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def nchain_offline(sampler: str, seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        env="nchain:N=20", mode="offline", sampler=sampler, seed=seed, gamma=0.99,
        batch_size=32, dataset_episodes=200, n_updates=100, lr=1.0, target_update_interval=1,
        eval_random_prob=0.0, eval_episodes=1,  # greedy policy on a deterministic chain
    ).validate()


@lru_cache(maxsize=None)
def offline_run(sampler: str, seed: int):
    return tuple(train_offline(nchain_offline(sampler, seed)))


def first_solve(recs) -> float:
    return next((r.updates for r in recs if r.normalized_return >= 1.0), math.inf)


def test_c01_nchain_update_ordering(capsys):
    med = {s: float(np.median([first_solve(offline_run(s, k)) for k in SEEDS]))
           for s in ("ter", "ebu", "uer", "per")}
    per_seed = {s: [first_solve(offline_run(s, k)) for k in SEEDS] for s in med}
    ok = (med["ter"] <= 50 and med["ebu"] >= 1.3 * med["ter"]
          and med["uer"] > 100 and med["per"] > 100)
    verdict(capsys, 1, ok, f"median updates to return 1.0 {med}; per seed {per_seed}")


def test_c02_value_error_at_update_50(capsys):
    ve = {s: [offline_run(s, k)[50].value_error for k in SEEDS] for s in ("ter", "uer", "per")}
    assert all(r.updates == 50 for r in offline_run("ter", 0)[50:51])
    wins = {s: sum(t < o for t, o in zip(ve["ter"], ve[s])) for s in ("uer", "per")}
    ok = wins["uer"] >= 4 and wins["per"] >= 4
    rounded = {s: [round(v, 4) for v in vals] for s, vals in ve.items()}
    verdict(capsys, 2, ok, f"TER strictly lower in {wins} of 5 seeds; errors {rounded}")


def test_c03_one_sweep_on_six_state_mdp(capsys):
    env = six_state_mdp()
    store = TransitionStore(100)
    g = TopologicalGraph()
    for step, (s, a, r, s2, term) in enumerate(env.edges()):
        t = Transition(env.observe(s), a, r, env.observe(s2), term, False, step)
        keys = (s.encode(), s2.encode())
        g.insert_transition(store.append(t, keys), t, keys=keys)
    sweep = ReverseSweep(g, store, np.random.default_rng(0), pred_budget=None, per_edge_budget=None)
    sweep.refill(len(store))  # one epoch pushes every stored transition exactly once
    order = sweep.pop_batch(len(store))
    q, tgt = TabularQ(env.n_actions, lr=1.0), TabularQ(env.n_actions)
    for idx in order:  # one backup per transition, each seeing the previous ones
        q.td_update(store.batch([idx], observations=False), tgt, 1.0)
        sync_target(q, tgt)
    oracle = solve_model(env.model(), 1.0)
    got = oracle.values_of(q, [s.encode() for s in oracle.states])
    sup = float(np.max(np.abs(got[oracle.valid] - oracle.q[oracle.valid])))
    ok = sweep.state.epoch == 1 and sorted(order) == list(range(len(store))) and sup == 0.0
    verdict(capsys, 3, ok, f"sup |Q - Q*| = {sup} after one sweep of {len(order)} transitions")


def test_c04_ebu_beta_zero_equivalence(capsys):
    rng = np.random.default_rng(4)
    worst = 0.0
    for ep in range(1000):
        n = int(rng.integers(1, 30))
        n_actions = int(rng.integers(2, 5))
        keys = [bytes([i]) for i in range(n + 1)]
        q, qt = TabularQ(n_actions), TabularQ(n_actions)
        for k in keys:
            q.table[k] = rng.normal(size=n_actions)
            qt.table[k] = rng.normal(size=n_actions)
        e = np.empty((n, 0))
        terminals = np.zeros(n, dtype=bool)
        terminals[-1] = rng.random() < 0.5
        b = Batch(np.arange(n), e, rng.integers(0, n_actions, n), rng.normal(size=n), e, terminals,
                  keys[:-1], keys[1:])
        double = bool(ep % 2)
        y = episode_targets(b, q, qt, 0.97, beta=0.0, double=double)
        worst = max(worst, float(np.max(np.abs(y - td_targets(b, q, qt, 0.97, double=double)))))
    verdict(capsys, 4, worst == 0.0, f"max |y_EBU - y_one_step| = {worst} over 1000 episodes")


def test_c05_sum_tree(capsys):
    rng = np.random.default_rng(5)
    t = SumTree(512)
    for k in range(10_000):
        if k % 10 == 0:
            idx = rng.integers(0, 512, 32)
            t.set_many(idx, rng.uniform(0.1, 1.0, 32))
        else:
            t[int(rng.integers(512))] = float(rng.uniform(0.1, 1.0))
    gap = abs(t.total - math.fsum(t.leaves()))
    leaves = t.leaves().copy()
    draws = t.find(rng.random(100_000) * t.total)
    observed = np.bincount(draws, minlength=512)
    expected = leaves / leaves.sum() * 100_000
    p = float(stats.chisquare(observed, expected).pvalue)
    verdict(capsys, 5, gap <= 1e-9 and p > 0.001, f"|root - sum| = {gap:.2e}; chi-square p = {p:.4f}")


def _sweep_and_per(seed: int):
    rng = np.random.default_rng(seed)
    store = TransitionStore(10**6)
    g = TopologicalGraph()
    per = PrioritizedReplay(store)
    step = 0
    for ep in range(60):
        pos = 0
        while pos < 12:
            step += 1
            nxt = max(pos - 1, 0) if rng.random() < 0.4 else pos + 1
            t = make_transition(step, s=pos, s2=nxt, terminal=nxt == 12)
            keys = (bytes([pos]), bytes([nxt]))
            idx = store.append(t, keys)
            g.insert_transition(idx, t, keys=keys)
            per.add(idx)
            pos = nxt
            if ep % 7 == 6:  # some episodes never finish: leaves non-terminal tails
                break
    return g, store, per, rng


def test_c06_batch_mixing_exact(capsys):
    bad, starved, total = [], 0, 0
    for eta in (0.0, 0.1, 0.2, 0.5, 1.0):
        for B in (32, 64):
            g, store, per, rng = _sweep_and_per(int(eta * 10) + B)
            sweep = ReverseSweep(g, store, rng)
            for _ in range(200):
                mb = mixed_batch(sweep, per, eta, B, rng)
                per.update_priorities(np.asarray(mb.indices)[mb.from_per], rng.normal(size=int(mb.from_per.sum())))
                total += 1
                if mb.starved:
                    starved += 1
                    continue
                if int(mb.from_per.sum()) != math.ceil(round(eta * B, 9)) or len(mb.indices) != B:
                    bad.append((eta, B, int(mb.from_per.sum())))
    # online runs: the learner's audit of every batch
    for eta in (0.1, 0.5):
        cfg = ExperimentConfig(env="nchain:N=6", sampler="ter_mixed", eta=eta, batch_size=32,
                               total_steps=600, warmup_steps=100, replay_ratio=1.0,
                               eval_interval=500, eval_episodes=1).validate()
        run = Run(cfg)
        list(train(cfg, run))
        a = run.learner.audit
        for n_per, size, st in zip(a.n_per, a.sizes, a.starved):
            total += 1
            starved += st
            if not st and n_per != per_share(eta, 32):
                bad.append((eta, 32, n_per))
    verdict(capsys, 6, not bad, f"{total} batches, {starved} starved (excluded), {len(bad)} with a wrong PER share")


def test_c07_single_expansion_on_cyclic_graphs(capsys):
    rng = np.random.default_rng(7)
    worst, epochs = 0, 0
    for _ in range(100):
        n = int(rng.integers(2, 51))
        perm = rng.permutation(n)
        edges = [(perm[i], perm[(i + 1) % n]) for i in range(n)]  # strongly connected
        edges += [tuple(rng.integers(0, n, 2)) for _ in range(int(rng.integers(0, 3 * n)))]
        terms = set(rng.choice(n, size=int(rng.integers(1, max(2, n // 5))), replace=False).tolist())
        store = TransitionStore(10**6)
        g = TopologicalGraph()
        for step, (a, b) in enumerate(edges):
            t = make_transition(step, terminal=int(b) in terms)
            keys = (bytes([int(a)]), bytes([int(b)]))
            g.insert_transition(store.append(t, keys), t, keys=keys)
        sweep = ReverseSweep(g, store, rng, pred_budget=None, per_edge_budget=None, record_expansions=True)
        for _ in range(5):
            assert sweep.refill(32)
            sweep.pop_batch(32)
        counts = Counter(sweep.expansion_log)
        worst = max(worst, max(counts.values()))
        epochs += sweep.state.epoch
        assert sweep.n_expansions == len(sweep.expansion_log)
    verdict(capsys, 7, worst == 1, f"max expansions of one vertex in one epoch = {worst} ({epochs} epochs)")


def test_c08_pruning_bound(capsys):
    rng = np.random.default_rng(8)
    store = TransitionStore(100)
    g = TopologicalGraph()
    sweep = ReverseSweep(g, store, rng)
    oldest, batches, pos = 0, 0, 0
    for step in range(1, 1001):
        nxt = int(rng.integers(0, 30))
        t = make_transition(step, s=pos, s2=nxt, terminal=nxt < 3)
        keys = (bytes([pos]), bytes([nxt]))
        g.insert_transition(store.append(t, keys), t, keys=keys)
        pos = 29 if nxt < 3 else nxt
        if step % 3 == 0:
            idx = sweep.sample(8)
            if idx is not None:
                batches += 1
                oldest = max(oldest, max(store.current_step - store.insert_step(i) for i in idx))
    g.prune_all(store)
    g.check_invariants(store)
    dump = parse_dump(g.dump())
    dumped = {(bytes.fromhex(a), bytes.fromhex(b)) for a, b, _, _ in dump}
    live = {store.keys(i) for i in range(store.first_live(), len(store))}
    ok = oldest <= 100 and all(n > 0 for _, _, n, _ in dump) and dumped == live
    verdict(capsys, 8, ok, f"{batches} batches, oldest sampled age {oldest}; "
                           f"{len(dump)} dumped edges, all with live transitions")


def test_c09_gradient_check(capsys):
    rng = np.random.default_rng(9)
    errs = []
    for _ in range(20):
        d, n_a = int(rng.integers(2, 6)), int(rng.integers(2, 5))
        hidden = tuple(int(h) for h in rng.integers(2, 9, int(rng.integers(1, 3))))
        q = MLPQ(d, n_a, hidden, rng=rng)
        q.set_flat(rng.normal(scale=0.5, size=q.get_flat().size))
        n = int(rng.integers(4, 24))
        b = Batch(np.arange(n), rng.normal(size=(n, d)), rng.integers(0, n_a, n), 0.3 * rng.normal(size=n),
                  rng.normal(size=(n, d)), rng.random(n) < 0.3)
        errs.append(gradient_check(q, b, q.copy(), 0.9, weights=rng.random(n), n_coords=None, rng=rng))
    verdict(capsys, 9, max(errs) < 1e-4, f"max relative error over 20 instances = {max(errs):.2e}")


def lava_online(sampler: str, seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        env="crossing:7x7:lava:stochastic=0.1", sampler=sampler, eta=0.2, seed=seed,
        total_steps=100_000, warmup_steps=5_000, batch_size=64, replay_ratio=0.25, gamma=0.99,
        eps_decay_steps=50_000, target_update_interval=1, learner="tabular", lr=0.1,
        eval_interval=20_000, eval_episodes=20, final_eval_episodes=100,
    ).validate()


@lru_cache(maxsize=None)
def lava_run(sampler: str, seed: int):
    return tuple(train(lava_online(sampler, seed)))


def test_c10_stochastic_lava(capsys):
    ter = [lava_run("ter_mixed", k)[-1].normalized_return for k in SEEDS]
    uer = [lava_run("uer", k)[-1].normalized_return for k in SEEDS]
    wins = sum(t >= u for t, u in zip(ter, uer))
    verdict(capsys, 10, wins >= 4, f"TER(eta=0.2) >= UER in {wins}/5 seeds; "
                                   f"TER {[round(v, 3) for v in ter]} UER {[round(v, 3) for v in uer]}")


def test_c11_pseudo_terminal_distribution(capsys):
    rng = np.random.default_rng(11)
    worst_sum, worst_freq = 0.0, 1.0
    for k in range(100):
        n = int(rng.integers(2, 40))
        g = TopologicalGraph()
        store = TransitionStore(10**6)
        for i in range(n):
            t = make_transition(i)
            keys = (bytes([i]), bytes([(i + 1) % n]))
            g.insert_transition(store.append(t, keys), t, keys=keys)
        u = np.sort(rng.uniform(-5, 5, n))
        u = u[0] + np.concatenate([[0.0], np.cumsum(np.diff(u) + 0.5)])  # every gap >= 0.5
        rng.shuffle(u)
        for i in range(n):
            g.update_vertex_return(bytes([i]), float(u[i]))
        keys, p = g.pseudo_terminal_distribution(0.01)
        worst_sum = max(worst_sum, abs(math.fsum(p) - 1.0))
        if k < 20:
            best = bytes([int(np.argmax(u))])
            roots = [g.sample_pseudo_terminal_roots(1, 0.01, rng)[0] for _ in range(2000)]
            worst_freq = min(worst_freq, roots.count(best) / len(roots))
    ok = worst_sum <= 1e-9 and worst_freq > 0.99
    verdict(capsys, 11, ok, f"max |sum p - 1| = {worst_sum:.1e}; min max-U root frequency = {worst_freq:.4f}")


def test_c12_byte_identical_csvs(tmp_path, capsys):
    pairs = []
    for tag, make in [("offline_ter", lambda: train_offline(nchain_offline("ter", 3))),
                      ("offline_ebu", lambda: train_offline(nchain_offline("ebu", 3))),
                      ("online_lava", lambda: train(lava_online("ter_mixed", 0)))]:
        paths = []
        for rep in range(2):
            cfg = (nchain_offline(tag.split("_")[1], 3) if tag.startswith("offline")
                   else lava_online("ter_mixed", 0))
            paths.append(emit(make(), tmp_path / f"{tag}_{rep}.csv", cfg.to_dict()))
        pairs.append((tag, paths[0].read_bytes() == paths[1].read_bytes()
                      and (tmp_path / f"{tag}_0.csv.json").read_bytes() == (tmp_path / f"{tag}_1.csv.json").read_bytes()))
    cached = "".join(str(r) for r in lava_run("ter_mixed", 0))
    fresh = "".join(str(r) for r in train(lava_online("ter_mixed", 0)))
    ok = all(same for _, same in pairs) and cached == fresh
    verdict(capsys, 12, ok, f"identical: {dict(pairs)}")
