import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pgdqn.numcore import Prng
from pgdqn.policy import (
    EpsilonSchedule,
    epsilon_at,
    epsilon_greedy_pmf,
    greedy_action,
    pg_policy_pmf,
    sample_action,
)


def test_greedy_ties_lowest_index():
    assert greedy_action([1.0, 3.0, 3.0]) == 1


def test_pmf_hand_example():
    pmf = pg_policy_pmf([0.0, 2.0, 1.0], [0.5, 0.25, 0.25], 0.2)
    assert np.allclose(pmf.probs, [0.1, 0.85, 0.05], atol=1e-15)
    assert pmf.greedy_action == 1


def test_eps_one_is_eta():
    eta = np.array([0.2, 0.3, 0.5])
    assert np.array_equal(pg_policy_pmf([5.0, 0.0, 1.0], eta, 1.0).probs, eta)


def test_bad_inputs_rejected():
    with pytest.raises(ValueError):
        pg_policy_pmf([0, 1], [0.5, 0.5], 0.0)
    with pytest.raises(ValueError):
        pg_policy_pmf([0, 1], [0.7, 0.5], 0.1)
    with pytest.raises(ValueError):
        pg_policy_pmf([0, 1, 2], [0.5, 0.5], 0.1)


triples = st.integers(2, 12).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-100, 100), min_size=n, max_size=n).map(np.array),
    st.lists(st.floats(1e-6, 1.0), min_size=n, max_size=n).map(lambda v: np.array(v) / np.sum(v)),
    st.floats(1e-6, 1.0),
))


@given(triples)
def test_pmf_simplex(t):
    q, eta, eps = t
    p = pg_policy_pmf(q, eta, eps).probs
    assert abs(p.sum() - 1.0) <= 1e-12 and np.all(p >= 0)


@given(triples)
def test_uniform_eta_is_epsilon_greedy(t):
    q, _, eps = t
    n = q.size
    p = pg_policy_pmf(q, np.full(n, 1.0 / n), eps).probs
    want = np.full(n, eps / n)
    want[np.argmax(q)] += 1 - eps
    assert np.allclose(p, want, rtol=0, atol=1e-15)
    assert np.array_equal(p, epsilon_greedy_pmf(q, eps).probs)


@given(triples, st.floats(1e-3, 1e3))
def test_positive_rescale_invariant(t, c):
    q, eta, eps = t
    assert np.array_equal(pg_policy_pmf(q, eta, eps).probs, pg_policy_pmf(q * c, eta, eps).probs)


def test_sample_action_frequencies():
    rng = Prng(3)
    probs = np.array([0.1, 0.6, 0.3])
    counts = np.bincount([sample_action(probs, rng) for _ in range(30_000)], minlength=3) / 30_000
    assert np.allclose(counts, probs, atol=0.01)


def test_sample_action_never_picks_zero_mass():
    rng = Prng(4)
    assert {sample_action(np.array([0.0, 1.0, 0.0]), rng) for _ in range(200)} == {1}


def test_epsilon_schedule():
    sch = EpsilonSchedule(1.0, 0.1, 100)
    assert epsilon_at(sch, 0) == 1.0
    assert epsilon_at(sch, 50) == pytest.approx(0.55)
    assert epsilon_at(sch, 100) == pytest.approx(0.1)
    assert epsilon_at(sch, 10_000) == pytest.approx(0.1)
