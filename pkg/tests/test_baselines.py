import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ter.baselines import (EBUReplay, EpisodeBuffer, ErrorModel, LinearSchedule,
                           PrioritizedReplay, SumTree, UniformReplay, episode_targets)
from ter.core import Batch, TransitionStore
from ter.qlearn import TabularQ, td_targets

from conftest import make_transition


def key_batch(keys, actions, rewards, terminals):
    """Batch over byte keys ``keys[i] -> keys[i+1]`` without observations."""
    n = len(actions)
    e = np.empty((n, 0))
    return Batch(np.arange(n), e, np.asarray(actions), np.asarray(rewards, dtype=float), e,
                 np.asarray(terminals, dtype=bool), list(keys[:-1]), list(keys[1:]))


def filled_store(n, capacity=None):
    store = TransitionStore(capacity or n)
    for i in range(n):
        store.append(make_transition(i, s=i, s2=i + 1))
    return store


# sum tree

@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1e3, allow_nan=False), min_size=1, max_size=70),
       st.lists(st.tuples(st.integers(0, 69), st.floats(0.0, 1e3)), max_size=40))
def test_sumtree_root_is_sum_of_leaves(init, writes):
    t = SumTree(len(init))
    t.set_many(np.arange(len(init)), np.array(init))
    for i, p in writes:
        if i < len(init):
            t[i] = p
    assert t.total == pytest.approx(t.leaves().sum(), rel=1e-12, abs=1e-12)
    for node in range(1, t.size):
        assert t.tree[node] == t.tree[2 * node] + t.tree[2 * node + 1]


def test_sumtree_set_many_matches_scalar_writes():
    a, b = SumTree(13), SumTree(13)
    idx = np.array([3, 7, 3, 12, 0])
    p = np.array([1.0, 2.0, 5.0, 0.5, 0.25])
    a.set_many(idx, p)
    for i, v in zip(idx, p):
        b[int(i)] = v
    assert np.array_equal(a.tree, b.tree)
    assert a[3] == 5.0  # last duplicate wins


def test_sumtree_never_returns_zero_leaf():
    t = SumTree(8)
    t[2], t[5] = 1.0, 3.0
    found = t.find(np.linspace(0, np.nextafter(4.0, 0), 1000))
    assert set(found.tolist()) == {2, 5}


def test_sumtree_rejects_bad_priority():
    t = SumTree(4)
    with pytest.raises(ValueError):
        t[0] = -1.0
    with pytest.raises(ValueError):
        t[0] = float("nan")
    with pytest.raises(IndexError):
        t[4] = 1.0


def test_sumtree_proportional_frequencies(rng):
    t = SumTree(4)
    t.set_many(np.arange(4), np.array([1.0, 2.0, 3.0, 4.0]))
    draws = np.concatenate([t.sample_stratified(10, rng) for _ in range(20_000)])
    freq = np.bincount(draws, minlength=4) / len(draws)
    assert np.allclose(freq, [0.1, 0.2, 0.3, 0.4], atol=0.005)


# uniform

def test_uniform_frequencies():
    store = filled_store(10)
    r = UniformReplay(store)
    rng = np.random.default_rng(7)
    draws = np.concatenate([r.sample(1000, rng) for _ in range(1000)])
    freq = np.bincount(draws, minlength=10) / len(draws)
    assert np.all(np.abs(freq - 0.1) <= 0.005)


def test_uniform_only_live():
    store = filled_store(10, capacity=5)
    store.advance(12)
    lo, _ = store.live_range()
    assert lo == 7
    draws = UniformReplay(store).sample(500, np.random.default_rng(0))
    assert min(draws) >= 7


def test_uniform_rejects_empty_store():
    with pytest.raises(ValueError):
        UniformReplay(TransitionStore(3)).sample(4, np.random.default_rng(0))


# prioritized

def test_per_equal_priorities_unit_weights(rng):
    store = filled_store(16)
    per = PrioritizedReplay(store)
    for i in range(16):
        per.add(i)
    _, w = per.sample(8, rng)
    assert np.allclose(w, 1.0)


def test_per_proportional_frequencies():
    store = filled_store(2)
    per = PrioritizedReplay(store, alpha=1.0, eps=0.0)
    per.add(0)
    per.add(1)
    per.update_priorities([0, 1], [3.0, 1.0])
    rng = np.random.default_rng(3)
    draws = np.concatenate([per.sample(1, rng)[0] for _ in range(40_000)])
    assert np.mean(draws == 0) == pytest.approx(0.75, abs=0.01)


def test_per_importance_weights_beta_one():
    store = filled_store(2)
    per = PrioritizedReplay(store, alpha=1.0, beta=1.0, eps=0.0)
    per.add(0)
    per.add(1)
    per.update_priorities([0, 1], [3.0, 1.0])
    idx, w = per.sample(4, np.random.default_rng(0))
    assert idx == [0, 0, 0, 1]  # unit-mass strata over cumulative priorities (3, 1)
    # (N P)^-1 = (2 * 0.75)^-1, (2 * 0.25)^-1; normalised by the max
    assert np.allclose(w, [1 / 3, 1 / 3, 1 / 3, 1.0])


def test_per_zero_td_priority_is_eps_pow_alpha():
    store = filled_store(1)
    per = PrioritizedReplay(store, alpha=0.6, eps=1e-6)
    per.add(0)
    per.update_priorities([0], [0.0])
    assert per.priority(0) == pytest.approx(1e-6 ** 0.6, rel=1e-12)


def test_per_new_transitions_get_max_priority():
    store = filled_store(3)
    per = PrioritizedReplay(store, alpha=1.0, eps=0.0)
    per.add(0)
    per.update_priorities([0], [5.0])
    per.add(1)
    assert per.priority(1) == 5.0


def test_per_expired_leaves_zeroed():
    store = TransitionStore(3)
    per = PrioritizedReplay(store)
    for i in range(10):
        per.add(store.append(make_transition(i)))
    assert len(per) == store.n_live() == 4
    assert per.tree.total == pytest.approx(4.0)
    idx, _ = per.sample(64, np.random.default_rng(0))
    assert min(idx) >= store.first_live()


def test_linear_schedule():
    s = LinearSchedule(0.4, 1.0, 100)
    assert s(0) == 0.4 and s(50) == pytest.approx(0.7) and s(100) == 1.0 and s(1000) == 1.0


# episodic backward update

def test_ebu_beta_one_chain():
    q = TabularQ(2)
    b = key_batch([b"a", b"b", b"c", b"g"], [0, 0, 0], [0.0, 0.0, 1.0], [False, False, True])
    for double in (True, False):
        y = episode_targets(b, q, q.copy(), 0.9, beta=1.0, double=double)
        assert np.allclose(y, [0.81, 0.9, 1.0], rtol=0, atol=1e-12)


def test_ebu_terminal_single_step():
    q = TabularQ(2)
    q.table[b"g"] = np.array([9.0, 9.0])
    b = key_batch([b"a", b"g"], [1], [2.5], [True])
    assert episode_targets(b, q, q, 0.9, beta=0.5).tolist() == [2.5]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**16), st.booleans())
def test_ebu_beta_zero_is_one_step(n, seed, double):
    rng = np.random.default_rng(seed)
    keys = [bytes([i]) for i in range(n + 1)]
    q, qt = TabularQ(3), TabularQ(3)
    for k in keys:
        q.table[k] = rng.normal(size=3)
        qt.table[k] = rng.normal(size=3)
    b = key_batch(keys, rng.integers(0, 3, n), rng.normal(size=n), [False] * (n - 1) + [bool(seed % 2)])
    y = episode_targets(b, q, qt, 0.95, beta=0.0, double=double)
    assert np.allclose(y, td_targets(b, q, qt, 0.95, double=double), rtol=0, atol=1e-12)


def test_episode_buffer_and_reverse_serving():
    store = TransitionStore(100)
    buf = EpisodeBuffer(store, include_timeout_roots=False)
    for i in range(3):
        idx = store.append(make_transition(i, s=i, s2=i + 1, r=float(i == 2), terminal=i == 2),
                           keys=(bytes([i]), bytes([i + 1])))
        buf.add(idx, terminal=i == 2, timeout=False)
    idx = store.append(make_transition(3, timeout=True), keys=(b"x", b"y"))
    buf.add(idx, terminal=False, timeout=True)
    assert buf.n_eligible() == 1 and len(buf.episodes()) == 2
    ebu = EBUReplay(buf, beta=1.0)
    q = TabularQ(2)
    i1, y1 = ebu.sample(2, q, q, 0.9, np.random.default_rng(0), observations=False)
    assert i1 == [2, 1] and np.allclose(y1, [1.0, 0.9])
    i2, y2 = ebu.sample(2, q, q, 0.9, np.random.default_rng(0), observations=False)
    assert i2 == [0] and np.allclose(y2, [0.81])
    assert ebu.pending() == 0


def test_episode_buffer_drops_expired():
    store = TransitionStore(2)
    buf = EpisodeBuffer(store)
    for i in range(6):
        buf.add(store.append(make_transition(i, terminal=True)), terminal=True, timeout=False)
    assert buf.n_eligible() == 3
    with pytest.raises(ValueError):
        EpisodeBuffer(TransitionStore(1)).sample_episode(np.random.default_rng(0))


# DisCor

def test_discor_equal_error_gives_unit_weights():
    em = ErrorModel.tabular(2)
    for k in (b"b", b"c"):
        em.model.table[k] = np.array([4.0, 4.0])
    q = TabularQ(2)
    b = key_batch([b"a", b"b", b"c"], [0, 1], [0.0, 0.0], [False, False])
    w, _ = em.weights(b, q, 0.9)
    assert np.allclose(w, 1.0)


def test_discor_weight_ratio():
    em = ErrorModel.tabular(2, temperature=2.0, normalize=False)
    em.model.table[b"hi"] = np.array([6.0, 0.0])
    q = TabularQ(2)
    q.table[b"hi"] = np.array([1.0, 0.0])
    e = np.empty((2, 0))
    b = Batch(np.arange(2), e, np.array([0, 0]), np.zeros(2), e, np.array([False, False]),
              [b"s", b"t"], [b"lo", b"hi"])
    w, a_next = em.weights(b, q, 0.9)
    assert a_next.tolist() == [0, 0]
    assert w[0] / w[1] == pytest.approx(np.exp(0.9 * 6.0 / 2.0), rel=1e-12)


def test_discor_terminal_successor_has_zero_error():
    em = ErrorModel.tabular(1, normalize=False)
    em.model.table[b"g"] = np.array([100.0])
    b = key_batch([b"a", b"g"], [0], [1.0], [True])
    w, _ = em.weights(b, TabularQ(1), 0.9)
    assert w.tolist() == [1.0]
    y = em.train(b, np.array([0.5]), np.array([0]), 0.9)
    assert y.tolist() == [0.5]


def test_discor_train_recursion_and_temperature_reset():
    em = ErrorModel.tabular(1, lr=1.0, temperature=10.0)
    em.target.table[b"b"] = np.array([2.0])
    b = key_batch([b"a", b"b"], [0], [0.0], [False])
    y = em.train(b, np.array([-1.0]), np.array([0]), 0.5)
    assert y.tolist() == [2.0]  # |td| + gamma * Delta_target(s', a')
    assert em.model.table[b"a"][0] == 2.0
    em.model.table[b"b"] = np.array([3.0])
    em.weights(b, TabularQ(1), 0.5)
    em.sync()
    assert em.temperature == 3.0
    assert em.target.table[b"a"][0] == 2.0
