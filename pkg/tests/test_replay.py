import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pgdqn.numcore import Prng
from pgdqn.replay import ReplayBuffer, Transition, push, sample


def _t(i, obs_dim=2):
    return Transition(np.full(obs_dim, float(i)), i % 3, float(i), np.full(obs_dim, i + 0.5), i % 7 == 0, False)


def test_ring_eviction_keeps_latest():
    buf = ReplayBuffer(3, 2, 3)
    for i in range(1, 5):
        push(buf, _t(i))
    assert len(buf) == 3
    assert [buf.get(k).reward for k in range(3)] == [2.0, 3.0, 4.0]


def test_push_then_sample_one():
    buf = ReplayBuffer(10, 2)
    push(buf, _t(5))
    b = sample(buf, 1, Prng(0))
    assert b.rewards[0] == 5.0 and np.array_equal(b.states[0], [5.0, 5.0])


@given(st.integers(1, 50), st.integers(0, 400))
def test_size_never_exceeds_capacity(cap, n):
    buf = ReplayBuffer(cap, 1)
    for i in range(n):
        buf.push(_t(i, 1))
        assert len(buf) <= cap
    assert len(buf) == min(cap, n)


def test_size_bound_long_run():
    buf = ReplayBuffer(64, 1)
    for i in range(100_000):
        buf.push(Transition(np.zeros(1), 0, 0.0, np.zeros(1)))
    assert len(buf) == 64


def test_fifo_eviction_order():
    buf = ReplayBuffer(4, 1)
    for i in range(10):
        buf.push(_t(i, 1))
        oldest = max(0, i - 3)
        assert buf.get(0).reward == float(oldest)


def test_single_item_with_replacement():
    buf = ReplayBuffer(5, 2)
    buf.push(_t(3))
    b = buf.sample(4, Prng(1))
    assert list(b.rewards) == [3.0] * 4


def test_sample_too_many_rejected():
    buf = ReplayBuffer(5, 2)
    buf.push(_t(1))
    with pytest.raises(ValueError):
        buf.sample(2, Prng(0), replace=False)
    with pytest.raises(ValueError):
        ReplayBuffer(5, 2).sample(1, Prng(0))


def test_same_seed_same_indices():
    buf = ReplayBuffer(100, 2)
    for i in range(100):
        buf.push(_t(i))
    a = buf.sample(32, Prng(9))
    b = buf.sample(32, Prng(9))
    assert np.array_equal(a.indices, b.indices)


def test_without_replacement_distinct():
    buf = ReplayBuffer(20, 1)
    for i in range(20):
        buf.push(_t(i, 1))
    b = buf.sample(20, Prng(3), replace=False)
    assert sorted(b.rewards) == [float(i) for i in range(20)]


def test_uniform_frequencies_size_10():
    buf = ReplayBuffer(10, 1)
    for i in range(10):
        buf.push(_t(i, 1))
    rng = Prng(12)
    counts = np.zeros(10)
    for _ in range(10_000):
        b = buf.sample(10, rng)
        np.add.at(counts, b.indices, 1)
    freq = counts / counts.sum()
    assert np.all(np.abs(freq - 0.1) <= 0.0015)


def test_uniform_chi_square_16_slots():
    buf = ReplayBuffer(16, 1)
    for i in range(16):
        buf.push(_t(i, 1))
    rng = Prng(5)
    counts = np.zeros(16)
    for _ in range(100_000 // 20):
        np.add.at(counts, buf.sample(20, rng).indices, 1)
    expected = counts.sum() / 16
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # chi-square critical value at alpha = 0.001 with 15 degrees of freedom
    assert chi2 < 37.697


def test_invalid_transition_rejected():
    buf = ReplayBuffer(4, 1, n_actions=2)
    with pytest.raises(ValueError):
        buf.push(Transition(np.zeros(1), 2, 0.0, np.zeros(1)))
    with pytest.raises(ValueError):
        buf.push(Transition(np.zeros(1), 0, float("nan"), np.zeros(1)))
