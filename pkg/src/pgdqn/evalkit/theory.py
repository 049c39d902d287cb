"""Executable checks of the two theoretical claims: monotone policy
improvement under the guided policy, and the Boltzmann fixed point of the
entropy-regularized preference objective."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..agents import DualNetwork, NetworkSpec, get_variant
from ..envkit.tabular import TabularMdp, mdp_policy_eval, random_mdp
from ..numcore.functional import softmax
from ..numcore.optim import OptimizerState
from ..numcore.prng import Prng


def kl_to_boltzmann(eta, q, alpha: float) -> float:
    """KL(eta || softmax(q / alpha)) in nats, with 0 log 0 = 0."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    eta = np.asarray(eta, dtype=np.float64)
    if np.any(eta < 0) or abs(eta.sum() - 1.0) > 1e-9:
        raise ValueError("eta is not a distribution")
    z = np.asarray(q, dtype=np.float64) / alpha
    z = z - z.max()
    log_target = z - np.log(np.exp(z).sum())
    nz = eta > 0
    kl = float(np.sum(eta[nz] * (np.log(eta[nz]) - log_target[nz])))
    return max(kl, 0.0)


def guided_policy_table(greedy: np.ndarray, eta: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-state (1 - eps) [a = greedy(s)] + eps eta(a|s)."""
    pi = epsilon * np.asarray(eta, dtype=np.float64)
    pi[np.arange(pi.shape[0]), greedy] += 1.0 - epsilon
    return pi


@dataclass
class ImprovementReport:
    epsilon: float
    mode: str
    min_diffs: list[float]
    accepted: int = 0  # boltzmann-mode proposals that satisfied the eta condition
    proposed: int = 0

    @property
    def worst(self) -> float:
        return min(self.min_diffs) if self.min_diffs else 0.0


def verify_policy_improvement(mdp: TabularMdp, epsilon: float, n_rounds: int = 10, mode: str = "greedy",
                              rng: Prng | None = None, alpha0: float = 1.0, alpha_decay: float = 0.5,
                              eta0=None) -> ImprovementReport:
    """Iterate eval / improve on the guided policy and record min(Q^{i+1} - Q^i) each round.

    mode ``greedy``: eta^{i+1} is the point mass on argmax Q^i.
    mode ``boltzmann``: eta^{i+1} = softmax(Q^i / alpha_i) with alpha_i shrinking;
    in any state where that would lower sum_a eta Q^i the previous eta is kept.
    mode ``fixed``: no update at all (differences must be exactly 0).
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    if mdp.gamma >= 1.0:
        raise ValueError("policy improvement check needs gamma < 1")
    if mode not in ("greedy", "boltzmann", "fixed"):
        raise ValueError(f"unknown improvement mode {mode!r}")
    S, A = mdp.n_states, mdp.n_actions
    rng = rng or Prng(0)
    greedy = np.array([rng.randint(A) for _ in range(S)])
    if eta0 is None:
        eta = np.full((S, A), 1.0 / A)
    else:
        eta = np.array(eta0, dtype=np.float64)
    pi = guided_policy_table(greedy, eta, epsilon)
    q = mdp_policy_eval(mdp, pi)
    report = ImprovementReport(epsilon, mode, [])
    alpha = alpha0
    for _ in range(n_rounds):
        if mode == "fixed":
            new_pi = pi
        else:
            greedy = q.argmax(axis=1)
            if mode == "greedy":
                eta = np.zeros((S, A))
                eta[np.arange(S), greedy] = 1.0
            else:
                cand = np.stack([softmax(row / alpha) for row in q])
                better = (cand * q).sum(axis=1) >= (eta * q).sum(axis=1)
                report.proposed += S
                report.accepted += int(better.sum())
                eta = np.where(better[:, None], cand, eta)
                alpha *= alpha_decay
            new_pi = guided_policy_table(greedy, eta, epsilon)
        q_new = mdp_policy_eval(mdp, new_pi)
        report.min_diffs.append(float((q_new - q).min()))
        pi, q = new_pi, q_new
    return report


@dataclass
class FleetReport:
    worst: float
    n_mdps: int
    epsilons: tuple
    rounds: int
    seconds: float
    worst_case: tuple | None = None
    reports: list = field(default_factory=list, repr=False)

    def passed(self, tol: float = 1e-9) -> bool:
        return self.worst >= -tol


def improvement_fleet(n_mdps: int = 100, n_states: int = 5, n_actions: int = 3, gamma: float = 0.9,
                  epsilons=(0.1, 0.5, 1.0), n_rounds: int = 10, modes=("greedy", "boltzmann"),
                  seed: int = 0) -> FleetReport:
    """Policy-improvement check over a seeded fleet of random MDPs."""
    t0 = time.perf_counter()
    worst, worst_case, reports = np.inf, None, []
    fleet = Prng(seed)
    for k in range(n_mdps):
        mdp = random_mdp(n_states, n_actions, gamma, Prng(fleet.next_u64()))
        init_seed = fleet.next_u64()
        for eps in epsilons:
            for mode in modes:
                r = verify_policy_improvement(mdp, eps, n_rounds, mode=mode, rng=Prng(init_seed))
                reports.append(r)
                if r.worst < worst:
                    worst, worst_case = r.worst, (k, eps, mode)
    return FleetReport(float(worst), n_mdps, tuple(epsilons), n_rounds, time.perf_counter() - t0,
                       worst_case, reports)


# -- fixed-Q bandits --------------------------------------------------------

def bandit_network(n_actions: int, rng: Prng, obs_dim: int = 4, hidden=(16,)) -> DualNetwork:
    spec = NetworkSpec.for_variant(get_variant("PGDQN"), obs_dim, n_actions, embed_sizes=tuple(hidden),
                                   head_hidden=())
    return DualNetwork.build(spec, rng, rng)


@dataclass
class FixedPointResult:
    n_actions: int
    alpha: float
    kl: float
    updates: int
    reached: bool
    eta: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)


def kl_fixed_point(q, alpha: float, max_updates: int = 20_000, tol: float = 1e-3, lr: float = 0.001,
                   seed: int = 0, check_every: int = 50, net: DualNetwork | None = None,
                   stop_early: bool = True) -> FixedPointResult:
    """Run expected-mode preference updates against a fixed Q and track KL to softmax(Q/alpha)."""
    from ..trainer.core import preference_update

    q = np.asarray(q, dtype=np.float64)
    n = q.size
    net = net or bandit_network(n, Prng(seed))
    state = np.ones(net.spec.obs_dim)
    opt = OptimizerState.rmsprop(lr, 0.95, 1e-8)

    def current_kl():
        eta = softmax(net.logits_forward(net.params, state))
        return kl_to_boltzmann(eta, q, alpha), eta

    kl, eta = current_kl()
    done = 0
    reached_at = 0 if kl <= tol else None
    while done < max_updates and not (stop_early and reached_at is not None):
        preference_update(net, state, 0, alpha, opt, "expected", q=q)
        done += 1
        if done % check_every == 0 or done == max_updates:
            kl, eta = current_kl()
            if kl <= tol and reached_at is None:
                reached_at = done
    kl, eta = current_kl()
    return FixedPointResult(n, alpha, kl, reached_at if reached_at is not None else done,
                            reached_at is not None, eta, q)


def kl_fixed_point_suite(sizes=(2, 6, 18), alphas=(0.1, 0.5, 1.0), max_updates: int = 20_000, tol: float = 1e-3,
                         seed: int = 0) -> list[FixedPointResult]:
    out = []
    for i, n in enumerate(sizes):
        rng = Prng(seed, stream=100 + i)
        q = np.array(rng.uniform_array(-1.0, 1.0, n))
        for j, a in enumerate(alphas):
            out.append(kl_fixed_point(q, a, max_updates, tol, seed=seed * 100 + i * 10 + j))
    return out
