import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgdqn.agents import DualNetwork, NetworkSpec, get_variant
from pgdqn.envkit import chain_mdp, mdp_value_iteration
from pgdqn.numcore import Prng
from pgdqn.numcore.functional import softmax
from pgdqn.numcore.optim import OptimizerState
from pgdqn.replay import Batch
from pgdqn.trainer import (
    Hyperparameters,
    TemperatureState,
    TrainingAborted,
    parse_override,
    profile,
    train,
)
from pgdqn.trainer.core import (
    frozen_advantage,
    preference_objective,
    preference_update,
    q_loss_and_grads,
    q_target_value,
    q_update,
    temperature_update,
)


def linear_q_net(n_actions, obs_dim=1, variant="DQN"):
    # no trunk, no hidden layer: Q = W s + b
    spec = NetworkSpec.for_variant(get_variant(variant), obs_dim, n_actions, embed_sizes=(), head_hidden=())
    return DualNetwork.build(spec, Prng(0), Prng(1))


def batch_of(s, a, r, s2, term):
    s = np.atleast_2d(np.asarray(s, float))
    return Batch(s, np.asarray(a), np.asarray(r, float), np.atleast_2d(np.asarray(s2, float)),
                 np.asarray(term, bool), np.zeros(len(a), bool), np.arange(len(a)))


def bandit_net(nA=2, seed=0, hidden=(8,)):
    spec = NetworkSpec.for_variant(get_variant("PGDQN"), 2, nA, embed_sizes=(), head_hidden=hidden)
    return DualNetwork.build(spec, Prng(seed), Prng(seed + 1))


# targets ------------------------------------------------------------------

def test_target_max_rule():
    net = linear_q_net(2)
    net.target["q.0.w"][...] = 0.0
    net.target["q.0.b"][...] = [10.0, 3.0]
    y = q_target_value(batch_of([[0.0]], [0], [1.0], [[0.0]], [False]), net, 0.99)
    assert y[0] == pytest.approx(10.9)


def test_target_terminal_masked():
    net = linear_q_net(2)
    net.target["q.0.b"][...] = [1e6, 1e6]
    y = q_target_value(batch_of([[0.0]], [0], [-1.0], [[0.5]], [True]), net, 0.99)
    assert y[0] == -1.0


def test_target_truncated_still_bootstraps():
    net = linear_q_net(2)
    net.target["q.0.w"][...] = 0.0
    net.target["q.0.b"][...] = [2.0, 1.0]
    b = batch_of([[0.0]], [0], [0.0], [[0.0]], [False])
    b.truncateds[...] = True
    assert q_target_value(b, net, 0.5)[0] == pytest.approx(1.0)


def test_target_double_rule():
    net = linear_q_net(3)
    net.params["q.0.w"][...] = 0.0
    net.params["q.0.b"][...] = [1.0, 5.0, 3.0]
    net.target["q.0.w"][...] = 0.0
    net.target["q.0.b"][...] = [2.0, 0.0, 4.0]
    b = batch_of([[0.0]], [0], [0.0], [[0.0]], [False])
    assert q_target_value(b, net, 1.0, "double")[0] == 0.0
    assert q_target_value(b, net, 1.0, "max")[0] == 4.0


# q update -----------------------------------------------------------------

def test_zero_loss_zero_grad():
    net = linear_q_net(2, obs_dim=2)
    s = np.array([[0.3, -0.4]])
    y = net.q_forward(net.params, s)[0, [1]]
    loss, grads = q_loss_and_grads(net, s, [1], y)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_single_transition_grad_form():
    net = linear_q_net(2, obs_dim=2)
    s = np.array([[0.3, -0.4]])
    q = net.q_forward(net.params, s)[0, 1]
    y = np.array([2.0])
    _, g = q_loss_and_grads(net, s, [1], y)
    # dQ/dW row 1 = s, dQ/db[1] = 1
    np.testing.assert_allclose(g["q.0.w"][1], 2 * (q - 2.0) * s[0], rtol=1e-12)
    np.testing.assert_allclose(g["q.0.w"][0], 0.0)
    assert g["q.0.b"][1] == pytest.approx(2 * (q - 2.0))


def test_repeated_updates_converge_monotonically():
    net = linear_q_net(2, obs_dim=2)
    b = batch_of([[0.5, 1.0]], [0], [0.0], [[0.0, 0.0]], [True])
    y = np.array([3.0])
    opt = OptimizerState.rmsprop(0.01, 0.95, 0.01)
    losses = [q_update(net, b, y, opt) for _ in range(300)]
    assert losses[-1] < 1e-3 * losses[0]
    assert all(b_ <= a_ + 1e-12 for a_, b_ in zip(losses, losses[1:])) or losses[-1] < 1e-6


def test_nonfinite_loss_aborts():
    net = linear_q_net(2)
    b = batch_of([[0.0]], [0], [0.0], [[0.0]], [True])
    with pytest.raises(TrainingAborted):
        q_update(net, b, np.array([np.inf]), OptimizerState.rmsprop(0.01))


# preference update ---------------------------------------------------------

def _kl(p, q):
    return float(np.sum(p * (np.log(p) - np.log(q))))


def _iterate(net, q, alpha, n, lr=0.01, mode="expected"):
    opt = OptimizerState.rmsprop(lr, 0.95, 1e-8)
    s = np.ones(2)
    for _ in range(n):
        preference_update(net, s, 0, alpha, opt, mode, q=q)
    return softmax(net.logits_forward(net.params, s))


def test_constant_q_drives_uniform():
    net = bandit_net(3)
    eta = _iterate(net, np.array([0.7, 0.7, 0.7]), 0.5, 8000, lr=1e-4)
    assert _kl(eta, np.full(3, 1 / 3)) <= 1e-6


def test_fixed_q_reaches_boltzmann():
    net = bandit_net(2)
    eta = _iterate(net, np.array([1.0, 0.0]), 0.5, 8000, lr=0.001)
    np.testing.assert_allclose(eta, [0.8808, 0.1192], atol=1e-3)
    np.testing.assert_allclose(eta, softmax(np.array([2.0, 0.0])), atol=1e-3)


def test_sampled_alpha_zero_increases_positive_advantage_action():
    net = bandit_net(3, seed=4)
    s = np.ones(2)
    q = np.array([1.0, 0.0, -0.5])
    eta0 = softmax(net.logits_forward(net.params, s))
    assert frozen_advantage(q, eta0)[0] > 0
    preference_update(net, s, 0, 0.0, OptimizerState.rmsprop(0.001), "sampled", q=q)
    eta1 = softmax(net.logits_forward(net.params, s))
    assert eta1[0] > eta0[0]


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(2, 6), st.floats(0.01, 2.0))
def test_expected_grad_is_eta_weighted_sampled_grad(seed, nA, alpha):
    net = bandit_net(nA, seed=seed)
    rng = Prng(seed)
    s = np.array(rng.normal_array(2))
    q = np.array(rng.uniform_array(-1, 1, nA))
    eta = softmax(net.logits_forward(net.params, s))
    _, _, g_exp = preference_objective(net, s, 0, alpha, "expected", q=q)
    acc = {k: np.zeros_like(v) for k, v in g_exp.items()}
    for a in range(nA):
        _, _, g = preference_objective(net, s, a, alpha, "sampled", q=q)
        for k in acc:
            acc[k] += eta[a] * g[k]
    for k in acc:
        np.testing.assert_allclose(acc[k], g_exp[k], atol=1e-10)


def test_preference_update_leaves_theta_alone_when_unshared():
    spec = NetworkSpec.for_variant(get_variant("PGDQN"), 3, 2, embed_sizes=(4,), head_hidden=(4,),
                                   share_embedding=False)
    net = DualNetwork.build(spec, Prng(0), Prng(1))
    theta = net.flat_view("theta").copy()
    phi = net.flat_view("phi").copy()
    preference_update(net, np.array([0.1, 0.2, 0.3]), 1, 0.5, OptimizerState.rmsprop(0.01))
    np.testing.assert_array_equal(net.flat_view("theta"), theta)
    assert not np.array_equal(net.flat_view("phi"), phi)


# temperature ----------------------------------------------------------------

def test_temperature_signs():
    xi = 0.5 * math.log(4)
    for h, sign in ((xi, 0), (xi + 0.3, -1), (xi - 0.3, 1)):
        temp = TemperatureState.create(1.0, xi, 0.01)
        a = temperature_update(temp, h)
        assert np.sign(round(a - 1.0, 15)) == sign


@settings(max_examples=50)
@given(st.lists(st.floats(0.0, math.log(6)), min_size=1, max_size=200), st.floats(1e-3, 1.0))
def test_alpha_stays_positive(entropies, lr):
    temp = TemperatureState.create(1.0, 0.5 * math.log(6), lr)
    for h in entropies:
        assert temperature_update(temp, h) > 0


# config -------------------------------------------------------------------

def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        Hyperparameters(lr_q=0)
    with pytest.raises(ValueError):
        Hyperparameters(tau_q=0)
    with pytest.raises(ValueError):
        Hyperparameters(gamma=0.0)
    with pytest.raises(ValueError):
        Hyperparameters(gamma=1.5)
    with pytest.raises(ValueError):
        Hyperparameters(pref_grad_mode="other")
    with pytest.raises(KeyError):
        profile("control-default", not_a_field=1)
    assert Hyperparameters().resolved_target_entropy(4) == pytest.approx(0.5 * math.log(4))


def test_atari_profile_values():
    hp = profile("paper-atari")
    assert (hp.batch_size, hp.tau_pref, hp.tau_q, hp.tau_target) == (32, 4, 4, 10_000)
    assert hp.lr_q == hp.lr_pref == hp.lr_alpha == 0.00025
    assert hp.gamma == 0.99


def test_parse_override():
    assert parse_override("lr_q=0.001") == ("lr_q", 0.001)
    assert parse_override("embed_sizes=[8,8]") == ("embed_sizes", [8, 8])
    assert parse_override("variant=DQN") == ("variant", "DQN")
    with pytest.raises(ValueError):
        parse_override("nope")


# the loop -------------------------------------------------------------------

def tiny(variant="PGDQN", **kw):
    base = dict(variant=variant, embed_sizes=(8,), head_hidden=(8,), max_steps=600, learning_start=100,
                eval_every=0, tau_target=50)
    base.update(kw)
    return profile("control-default", **base)


def test_update_cadence():
    hp = tiny(tau_pref=4, tau_q=3, tau_target=50, max_steps=1000, learning_start=100)
    log = train(hp, "cartpole", 0)
    S = log.frames
    assert abs(log.n_pref_updates - S // 4) <= 1
    assert abs(log.n_q_updates - (S - 100) // 3) <= 1
    assert abs(log.n_syncs - S // 50) <= 1
    assert all(t % 4 == 0 for t in log.pref_update_steps)
    assert all(t % 3 == 0 and t >= 100 for t in log.q_update_steps)
    frames = [e["frames"] for e in log.episodes]
    assert frames == sorted(frames)


def test_baselines_do_no_preference_updates():
    for v in ("DQN", "D2QN", "VD-D3QN", "NoisyNet-DQN"):
        log = train(tiny(v, max_steps=300), "cartpole", 1)
        assert log.n_pref_updates == 0 and log.n_q_updates > 0


def test_runlog_deterministic(tmp_path):
    hp = tiny(eval_every=200, eval_episodes=3)
    a = train(hp, "cartpole", 7)
    b = train(hp, "cartpole", 7)
    assert a.csv_text() == b.csv_text()
    assert a.eval_csv_text() == b.eval_csv_text()
    pa = a.write(tmp_path / "a")
    pb = b.write(tmp_path / "b")
    for k in pa:
        assert pa[k].read_bytes() == pb[k].read_bytes()
    c = train(hp, "cartpole", 8)
    assert c.csv_text() != a.csv_text()


def test_runlog_columns_and_sidecar(tmp_path):
    log = train(tiny(max_steps=300), "cartpole", 0)
    header = log.csv_text().splitlines()[0]
    assert header == "seed,episode,frames,return,epsilon,alpha,entropy,q_loss,pref_obj"
    side = log.sidecar()
    assert side["config"]["variant"] == "PGDQN" and len(side["config_hash"]) == 16


def test_nonfinite_run_aborts_with_partial_log():
    hp = tiny(max_steps=400, learning_start=40)
    with pytest.raises(TrainingAborted) as info:
        train(hp, "bandit", 0, env_kwargs={"rewards": (math.inf, 0.0)})
    assert info.value.runlog is not None
    assert info.value.runlog.aborted


def test_non_bias_contract_short():
    kw = dict(share_embedding=False, exploration_override="epsilon-greedy", max_steps=1500)
    seen = {}
    for v in ("DQN", "PGDQN"):
        batches = []
        log = train(tiny(v, **kw), "cartpole", 2, batch_hook=lambda t, b: batches.append(b.indices.copy()))
        seen[v] = (log.net.flat_view("theta").copy(), batches)
    np.testing.assert_array_equal(seen["DQN"][0], seen["PGDQN"][0])
    assert all(np.array_equal(x, y) for x, y in zip(seen["DQN"][1], seen["PGDQN"][1]))


@pytest.mark.slow
def test_chain_greedy_matches_value_iteration():
    hp = profile("control-default", variant="PGDQN", gamma=0.9, embed_sizes=(32,), head_hidden=(32,),
                 max_steps=20_000, learning_start=500, eps_horizon=5_000, eval_every=0, tau_target=200)
    log = train(hp, "chain", 0)
    q = log.net.q_forward(log.net.params, np.eye(5))
    _, pi = mdp_value_iteration(chain_mdp(5, 0.9))
    live = ~chain_mdp().terminal
    np.testing.assert_array_equal(q.argmax(1)[live], pi[live])
