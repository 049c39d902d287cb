"""Verification suites behind ``pgdqn verify``; each returns a SuiteReport."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..agents import DualNetwork, NetworkSpec, get_variant
from ..envkit import Acrobot, CartPole, MountainCar
from ..numcore.functional import grad_check, log_softmax, softmax
from ..numcore.prng import Prng
from .theory import kl_fixed_point_suite, improvement_fleet

SUITES = ("gradients", "theorem1", "kl-fixed-point", "envs")


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, measured, tolerance, detail=""):
        self.checks.append(Check(name, bool(passed), float(measured), float(tolerance), detail))

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "seconds": self.seconds,
                "checks": [asdict(c) for c in self.checks]}


# -- gradients --------------------------------------------------------------

_GRAD_VARIANTS = (("DQN", True), ("VD-D3QN", True), ("NoisyNet-DQN", True), ("PGDQN", True), ("PGDQN", False))


def _random_net(rng: Prng, variant: str, share: bool) -> DualNetwork:
    obs = 2 + rng.randint(4)
    n_act = 2 + rng.randint(4)
    embed = tuple(2 + rng.randint(6) for _ in range(1 + rng.randint(2)))
    head = tuple(2 + rng.randint(6) for _ in range(rng.randint(2)))
    spec = NetworkSpec.for_variant(get_variant(variant), obs, n_act, embed_sizes=embed, head_hidden=head,
                                   share_embedding=share)
    net = DualNetwork.build(spec, rng, rng)
    # move off the init scale so no unit sits exactly at a ReLU kink by construction
    net.flat[...] += 0.1 * np.array(rng.normal_array(net.flat.size))
    return net


def _flat_fn(net: DualNetwork, group: str, fn):
    view = net.flat_view(group)
    base = view.copy()

    def f(v):
        view[...] = v
        try:
            return fn()
        finally:
            view[...] = base
    return f, base


def gradient_checks(n_draws: int = 50, seed: int = 0, step: float = 1e-6):
    """Max relative error of the Q-loss and both preference-surrogate gradients."""
    from ..trainer.core import frozen_advantage, preference_objective, q_loss_and_grads

    rng = Prng(seed)
    worst = {"q_loss": 0.0, "pref_expected": 0.0, "pref_sampled": 0.0}
    for d in range(n_draws):
        variant, share = _GRAD_VARIANTS[d % len(_GRAD_VARIANTS)]
        net = _random_net(rng, variant, share)
        spec = net.spec
        n = 1 + rng.randint(4)
        x = np.array(rng.normal_array(n * spec.obs_dim)).reshape(n, spec.obs_dim)
        acts = np.array([rng.randint(spec.n_actions) for _ in range(n)])
        y = np.array(rng.normal_array(n))
        noise = net.sample_noise(rng) if spec.noisy else None

        _, grads = q_loss_and_grads(net, x, acts, y, noise=noise)
        analytic = net.flat_grad(grads, "theta")

        def q_loss():
            q = net.q_forward(net.params, x, noise)
            return float(np.mean((q[np.arange(n), acts] - y) ** 2))
        f, base = _flat_fn(net, "theta", q_loss)
        worst["q_loss"] = max(worst["q_loss"], grad_check(f, base, step, analytic).max_error)

        if not spec.preference:
            continue
        s = x[0]
        alpha = 0.05 + rng.random()
        q_fixed = net.q_forward(net.params, s)
        eta0 = softmax(net.logits_forward(net.params, s))
        adv = frozen_advantage(q_fixed, eta0)
        a_t = acts[0]
        for mode in ("expected", "sampled"):
            _, _, g = preference_objective(net, s, a_t, alpha, mode, q=q_fixed)
            analytic = net.flat_grad(g, "phi")

            def surrogate(mode=mode):
                logp = log_softmax(net.logits_forward(net.params, s))
                ent = -float(np.sum(np.exp(logp) * logp))
                if mode == "expected":
                    gain = float(np.sum(np.exp(logp) * adv))
                else:
                    gain = float(logp[a_t] * adv[a_t])
                return gain + alpha * ent
            f, base = _flat_fn(net, "phi", surrogate)
            key = f"pref_{mode}"
            worst[key] = max(worst[key], grad_check(f, base, step, analytic).max_error)
    return worst


def run_gradients(n_draws: int = 50, tol: float = 1e-5, seed: int = 0) -> SuiteReport:
    t0 = time.perf_counter()
    rep = SuiteReport("gradients")
    for name, err in gradient_checks(n_draws, seed).items():
        rep.add(name, err <= tol, err, tol, f"{n_draws} random network/state draws")
    rep.seconds = time.perf_counter() - t0
    return rep


def run_theorem1(n_mdps: int = 100, tol: float = 1e-9, seed: int = 0) -> SuiteReport:
    t0 = time.perf_counter()
    rep = SuiteReport("theorem1")
    for mode in ("greedy", "boltzmann"):
        fleet = improvement_fleet(n_mdps=n_mdps, modes=(mode,), seed=seed)
        rep.add(f"min_q_difference[{mode}]", fleet.passed(tol), fleet.worst, -tol,
                f"{n_mdps} MDPs x eps {list(fleet.epsilons)} x {fleet.rounds} rounds; worst at {fleet.worst_case}")
    fixed = improvement_fleet(n_mdps=min(n_mdps, 10), modes=("fixed",), seed=seed)
    rep.add("no_update_is_exact_zero", fixed.worst == 0.0, fixed.worst, 0.0)
    rep.seconds = time.perf_counter() - t0
    return rep


def run_kl_fixed_point(max_updates: int = 20_000, tol: float = 1e-3, seed: int = 0) -> SuiteReport:
    t0 = time.perf_counter()
    rep = SuiteReport("kl-fixed-point")
    for r in kl_fixed_point_suite(max_updates=max_updates, tol=tol, seed=seed):
        rep.add(f"kl[|A|={r.n_actions},alpha={r.alpha}]", r.reached, r.kl, tol, f"{r.updates} updates")
    rep.seconds = time.perf_counter() - t0
    return rep


# -- environments -----------------------------------------------------------

def acrobot_oracle_step(state, torque: float, dt: float = 0.2):
    """Independent RK4 of the two-link dynamics written as M(q) qdd = tau - c - g.

    Only the integrator step; wrapping and clipping are left to the caller.
    """
    m1 = m2 = 1.0
    l1, lc1, lc2, i1, i2, g = 1.0, 0.5, 0.5, 1.0, 1.0, 9.8

    def deriv(s):
        t1, t2, w1, w2 = s
        c2, s2 = math.cos(t2), math.sin(t2)
        M = np.array([
            [m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2) + i1 + i2, m2 * (lc2**2 + l1 * lc2 * c2) + i2],
            [m2 * (lc2**2 + l1 * lc2 * c2) + i2, m2 * lc2**2 + i2],
        ])
        h = m2 * l1 * lc2 * s2
        coriolis = np.array([-h * w2**2 - 2 * h * w1 * w2, h * w1**2])
        grav2 = m2 * lc2 * g * math.sin(t1 + t2)
        grav = np.array([(m1 * lc1 + m2 * l1) * g * math.sin(t1) + grav2, grav2])
        acc = np.linalg.solve(M, np.array([0.0, torque]) - coriolis - grav)
        return np.array([w1, w2, acc[0], acc[1]])

    s = np.asarray(state, dtype=np.float64)
    k1 = deriv(s)
    k2 = deriv(s + dt / 2 * k1)
    k3 = deriv(s + dt / 2 * k2)
    k4 = deriv(s + dt * k3)
    return s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def cartpole_oracle_step(state, action):
    """Gym cart-pole Euler step written out in closed form."""
    x, xd, th, thd = state
    f = 10.0 if action == 1 else -10.0
    mc, mp, l, g, tau = 1.0, 0.1, 0.5, 9.8, 0.02
    mt = mc + mp
    temp = (f + mp * l * thd**2 * math.sin(th)) / mt
    thacc = (g * math.sin(th) - math.cos(th) * temp) / (l * (4.0 / 3.0 - mp * math.cos(th) ** 2 / mt))
    xacc = temp - mp * l * thacc * math.cos(th) / mt
    return np.array([x + tau * xd, xd + tau * xacc, th + tau * thd, thd + tau * thacc])


def run_envs(seed: int = 0, n_states: int = 200) -> SuiteReport:
    t0 = time.perf_counter()
    rep = SuiteReport("envs")
    rng = Prng(seed)

    env = Acrobot(seed=seed)
    worst = 0.0
    for _ in range(n_states):
        s = [rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi, math.pi),
             rng.uniform(-3.0, 3.0), rng.uniform(-6.0, 6.0)]
        a = rng.randint(3)
        worst = max(worst, float(np.abs(np.array(env._rk4(s, env.torques[a])) - acrobot_oracle_step(s, env.torques[a])).max()))
    rep.add("acrobot_rk4_vs_mass_matrix_oracle", worst <= 1e-10, worst, 1e-10)

    env = CartPole(seed=seed)
    worst = 0.0
    for _ in range(n_states):
        s = [rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0), rng.uniform(-0.2, 0.2), rng.uniform(-1.0, 1.0)]
        a = rng.randint(2)
        env.set_state(s)
        worst = max(worst, float(np.abs(env.step(a).next_state - cartpole_oracle_step(s, a)).max()))
    rep.add("cartpole_euler_vs_oracle", worst <= 1e-12, worst, 1e-12)

    env = MountainCar(seed=seed)
    env.set_state([-0.5, 0.0])
    r = env.step(1)
    want = -0.0025 * math.cos(-1.5)
    err = max(abs(r.next_state[1] - want), abs(r.next_state[0] - (-0.5 + want)))
    rep.add("mountaincar_hand_step", err <= 1e-12 and r.reward == -1.0, err, 1e-12)

    # reset ranges and replay determinism
    env = CartPole(seed=seed)
    lo = np.inf
    hi = -np.inf
    for _ in range(1000):
        o = env.reset()
        lo, hi = min(lo, o.min()), max(hi, o.max())
    rep.add("cartpole_reset_range", -0.05 <= lo and hi <= 0.05, max(abs(lo), abs(hi)), 0.05)

    mismatches = 0
    for cls in (CartPole, MountainCar, Acrobot):
        actions = [rng.randint(cls.n_actions) for _ in range(300)]
        traces = []
        for _ in range(2):
            e = cls(seed=seed + 7)
            e.reset()
            tr = []
            for a in actions:
                res = e.step(a)
                tr.append((res.next_state.tobytes(), res.reward, res.terminal, res.truncated))
                if res.done:
                    e.reset()
            traces.append(tr)
        mismatches += traces[0] != traces[1]
    rep.add("replay_determinism", mismatches == 0, mismatches, 0)
    rep.seconds = time.perf_counter() - t0
    return rep


def run_suite(name: str, **kw) -> SuiteReport:
    runners = {"gradients": run_gradients, "theorem1": run_theorem1, "kl-fixed-point": run_kl_fixed_point,
               "envs": run_envs}
    if name not in runners:
        raise ValueError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    return runners[name](**kw)
