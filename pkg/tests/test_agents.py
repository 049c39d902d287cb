import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgdqn.agents import (
    VARIANTS,
    DualNetwork,
    NetworkSpec,
    dueling_aggregate,
    factorized_noise,
    get_variant,
    load_checkpoint,
    preference,
    q_values,
    save_checkpoint,
    scale_noise,
)
from pgdqn.numcore import Prng


def small(variant="PGDQN", obs=3, nA=2, seed=123, **kw):
    spec = NetworkSpec.for_variant(get_variant(variant), obs, nA, embed_sizes=(4,), head_hidden=(3,), **kw)
    return DualNetwork.build(spec, Prng(seed), Prng(seed + 1))


def test_variant_lookup_and_aliases():
    assert get_variant("noisynet").name == "NoisyNet-DQN"
    assert get_variant("ddqn").target_rule == "double"
    assert get_variant("VD-D3QN").head == "dueling"
    assert get_variant("PGDQN").dual
    with pytest.raises(ValueError, match="unknown variant"):
        get_variant("RAINBOW")


@pytest.mark.parametrize("variant", VARIANTS)
def test_q_shape_and_finite(variant):
    net = small(variant, obs=4, nA=3)
    q = q_values(net, np.zeros(4))
    assert q.shape == (3,)
    qb = net.q_forward(net.params, np.ones((5, 4)))
    assert qb.shape == (5, 3) and np.all(np.isfinite(qb))


def test_sync_makes_target_equal():
    net = small()
    net.flat_view("theta")[...] += 0.3
    s = np.array([0.2, -0.1, 0.5])
    assert not np.allclose(q_values(net, s), q_values(net, s, use_target=True))
    net.sync_target()
    np.testing.assert_array_equal(q_values(net, s), q_values(net, s, use_target=True))


def test_zero_final_layer_gives_zero_q():
    net = small("DQN")
    net.params["q.1.w"][...] = 0.0
    net.params["q.1.b"][...] = 0.0
    np.testing.assert_array_equal(q_values(net, [1.0, 2.0, 3.0]), np.zeros(2))


def test_zero_pref_head_gives_uniform():
    net = small(nA=4)
    net.params["pref.1.w"][...] = 0.0
    net.params["pref.1.b"][...] = 0.0
    np.testing.assert_allclose(preference(net, [0.5, -1.0, 2.0]), np.full(4, 0.25), atol=1e-15)


@settings(max_examples=50)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3), st.integers(0, 1000))
def test_preference_on_simplex(state, seed):
    net = small(nA=5, seed=seed)
    eta = preference(net, state)
    assert np.all(eta >= 0) and abs(eta.sum() - 1.0) < 1e-12


def test_wrong_state_width_raises():
    with pytest.raises(ValueError, match="state width"):
        q_values(small(), np.zeros(5))


def test_no_pref_branch_raises():
    with pytest.raises(ValueError):
        preference(small("DQN"), np.zeros(3))


def test_dueling_aggregate_identity():
    v = np.array([[2.0]])
    adv = np.array([[1.0, 3.0, -1.0]])
    q = dueling_aggregate(v, adv)
    np.testing.assert_allclose(q, [[2.0, 4.0, 0.0]])
    # mean of Q equals V
    assert q.mean() == pytest.approx(2.0)


def test_noise_scaling():
    np.testing.assert_allclose(scale_noise([4.0, -9.0, 0.0]), [2.0, -3.0, 0.0])
    ew, eb = factorized_noise(Prng(0), 3, 2)
    assert ew.shape == (2, 3) and eb.shape == (2,)
    # factorized: rank one
    assert np.linalg.matrix_rank(ew) == 1


def test_noisy_zero_noise_equals_mu_path():
    net = small("NoisyNet-DQN")
    s = np.array([0.1, 0.2, 0.3])
    q0 = net.q_forward(net.params, s, net.zero_noise())
    q_none = net.q_forward(net.params, s)
    np.testing.assert_array_equal(q0, q_none)
    qn = net.q_forward(net.params, s, net.sample_noise(Prng(5)))
    assert not np.allclose(q0, qn)


def test_theta_phi_groups_disjoint_unshared():
    net = small(share_embedding=False)
    assert not set(net.theta_names) & set(net.phi_names)
    assert all(n.startswith(("pembed.", "pref.")) for n in net.phi_names)
    # flat views alias the dict views
    net.flat_view("phi")[...] = 0.0
    assert np.all(net.params["pref.0.w"] == 0.0)


def test_shared_trunk_belongs_to_both_groups():
    net = small(share_embedding=True)
    assert "embed.0.w" in net.theta_names and "embed.0.w" in net.phi_names


def test_pref_stream_does_not_disturb_q_init():
    a = small(share_embedding=False, seed=7)
    spec = NetworkSpec.for_variant(get_variant("PGDQN"), 3, 2, embed_sizes=(4,), head_hidden=(3,),
                                   share_embedding=False)
    b = DualNetwork.build(spec, Prng(7), Prng(999))
    for n in a.theta_names:
        np.testing.assert_array_equal(a.params[n], b.params[n])


def test_checkpoint_round_trip(tmp_path):
    for variant in VARIANTS:
        net = small(variant)
        net.flat_view("theta")[...] += 0.01  # make target differ from behavior
        p = tmp_path / f"{variant}.json"
        save_checkpoint(net, p, {"note": "x"})
        back, meta = load_checkpoint(p)
        assert meta == {"note": "x"} and back.spec == net.spec
        np.testing.assert_array_equal(back.flat, net.flat)
        np.testing.assert_array_equal(back.target_flat, net.target_flat)


def test_checkpoint_validation(tmp_path):
    net = small()
    p = tmp_path / "c.json"
    save_checkpoint(net, p)
    rec = json.loads(p.read_text())
    rec["params"]["q.0.w"]["shape"] = [9, 9]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(rec))
    with pytest.raises(ValueError, match="shape"):
        load_checkpoint(bad)
    rec = json.loads(p.read_text())
    rec["format"] = "other"
    bad.write_text(json.dumps(rec))
    with pytest.raises(ValueError, match="not a"):
        load_checkpoint(bad)
    rec = json.loads(p.read_text())
    del rec["params"]["pref.0.b"]
    bad.write_text(json.dumps(rec))
    with pytest.raises(ValueError, match="names"):
        load_checkpoint(bad)


def test_pinned_regression_values():
    # recorded from the first verified build; guards init order and forward math
    net = small()
    s = [0.1, -0.2, 0.3]
    np.testing.assert_allclose(q_values(net, s), [0.33887318341521766, -0.6038607859575288], rtol=1e-12)
    np.testing.assert_allclose(preference(net, s), [0.5056690951815478, 0.49433090481845215], rtol=1e-12)
