"""Small tabular MDPs with exact solvers, plus env wrappers for them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numcore.prng import Prng
from .classic import Env, EnvError


class ConvergenceError(RuntimeError):
    pass


@dataclass
class TabularMdp:
    transition: np.ndarray  # (S, A, S')
    reward: np.ndarray  # (S, A)
    gamma: float
    terminal: np.ndarray = field(default=None)  # (S,) bool; absorbing, zero-valued

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.reward = np.asarray(self.reward, dtype=np.float64)
        s, a, s2 = self.transition.shape
        if s != s2 or self.reward.shape != (s, a):
            raise ValueError(f"inconsistent shapes P{self.transition.shape} R{self.reward.shape}")
        # gamma = 0 is allowed here (pure one-step reward), unlike in training configs
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if np.any(self.transition < 0):
            raise ValueError("negative transition probability")
        err = np.abs(self.transition.sum(axis=-1) - 1.0).max()
        if err > 1e-12:
            raise ValueError(f"transition rows off the simplex by {err:.3g}")
        if self.terminal is None:
            self.terminal = np.zeros(s, dtype=bool)
        self.terminal = np.asarray(self.terminal, dtype=bool)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def episodic(self) -> bool:
        return bool(self.terminal.any())

    def _continuation(self) -> np.ndarray:
        """P with mass into terminal states removed (they are worth zero)."""
        return self.transition * (~self.terminal)[None, None, :]


def mdp_policy_eval(mdp: TabularMdp, policy) -> np.ndarray:
    """Exact Q^pi by solving (I - gamma P Pi) Q = R as one linear system."""
    pi = np.asarray(policy, dtype=np.float64)
    S, A = mdp.n_states, mdp.n_actions
    if pi.shape != (S, A):
        raise ValueError(f"policy shape {pi.shape} != {(S, A)}")
    if mdp.gamma >= 1.0 and not mdp.episodic:
        raise ValueError("gamma = 1 needs an episodic MDP; the return is unbounded otherwise")
    cont = mdp._continuation()
    # M[(s,a), (s',a')] = P(s'|s,a) pi(a'|s')
    M = (cont[:, :, :, None] * pi[None, None, :, :]).reshape(S * A, S * A)
    reward = mdp.reward.copy()
    live = np.repeat(~mdp.terminal, A)
    lhs = np.eye(S * A) - mdp.gamma * M
    lhs[~live] = 0.0
    lhs[~live, ~live] = 1.0
    rhs = reward.reshape(-1)
    rhs = np.where(live, rhs, 0.0)
    try:
        q = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("policy evaluation system is singular (improper policy?)") from exc
    return q.reshape(S, A)


def greedy_policy(q: np.ndarray) -> np.ndarray:
    """Point mass on argmax, ties to the lowest index."""
    q = np.asarray(q)
    pi = np.zeros_like(q)
    pi[np.arange(q.shape[0]), q.argmax(axis=1)] = 1.0
    return pi


def bellman_optimal(mdp: TabularMdp, q: np.ndarray) -> np.ndarray:
    v = q.max(axis=1)
    out = mdp.reward + mdp.gamma * mdp._continuation() @ v
    out[mdp.terminal] = 0.0
    return out


def mdp_value_iteration(mdp: TabularMdp, tol: float = 1e-10, max_iter: int = 100_000):
    """Optimal Q (sup-norm Bellman residual <= tol) and its greedy policy."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iter):
        q_next = bellman_optimal(mdp, q)
        if np.abs(q_next - q).max() <= tol:
            return q, q.argmax(axis=1)
        q = q_next
    raise ConvergenceError(f"value iteration did not reach tol={tol} in {max_iter} sweeps")


def random_mdp(n_states: int, n_actions: int, gamma: float, rng: Prng, reward_range=(-1.0, 1.0)) -> TabularMdp:
    """Rows of uniform draws normalized onto the simplex; uniform rewards."""
    draws = np.array(rng.uniform_array(1e-3, 1.0, n_states * n_actions * n_states)).reshape(n_states, n_actions, n_states)
    P = draws / draws.sum(axis=-1, keepdims=True)
    lo, hi = reward_range
    R = np.array(rng.uniform_array(lo, hi, n_states * n_actions)).reshape(n_states, n_actions)
    return TabularMdp(P, R, gamma)


def chain_mdp(n_states: int = 5, gamma: float = 0.9, goal_reward: float = 1.0) -> TabularMdp:
    """Deterministic corridor: 0 = left, 1 = right; entering the last state pays and ends."""
    P = np.zeros((n_states, 2, n_states))
    R = np.zeros((n_states, 2))
    for s in range(n_states):
        P[s, 0, max(s - 1, 0)] = 1.0
        P[s, 1, min(s + 1, n_states - 1)] = 1.0
    R[n_states - 2, 1] = goal_reward
    terminal = np.zeros(n_states, dtype=bool)
    terminal[-1] = True
    return TabularMdp(P, R, gamma, terminal)


class TabularEnv(Env):
    """A TabularMdp exposed through the env protocol with one-hot observations."""

    name = "tabular"

    def __init__(self, mdp: TabularMdp, start_state: int | None = 0, max_steps: int = 100, seed: int = 0,
                 name: str | None = None):
        self.mdp = mdp
        self.n_actions = mdp.n_actions
        self.obs_dim = mdp.n_states
        self.start_state = start_state
        if name:
            self.name = name
        super().__init__(max_steps=max_steps, seed=seed)

    def _reset_state(self):
        if self.start_state is None:
            live = np.flatnonzero(~self.mdp.terminal)
            self.state = int(live[self.rng.randint(len(live))])
        else:
            self.state = int(self.start_state)

    def _set_internal(self, values):
        self.state = int(values[0])

    def observe(self):
        obs = np.zeros(self.obs_dim)
        obs[self.state] = 1.0
        return obs

    def _advance(self, action):
        row = self.mdp.transition[self.state, action]
        u = self.rng.random()
        nxt = int(np.searchsorted(np.cumsum(row), u, side="right"))
        nxt = min(nxt, self.obs_dim - 1)
        reward = float(self.mdp.reward[self.state, action])
        self.state = nxt
        return reward, bool(self.mdp.terminal[nxt])


class BanditEnv(Env):
    """Single-state task with a constant observation; never terminates."""

    name = "bandit"

    def __init__(self, rewards, obs_dim: int = 4, max_steps: int = 50, seed: int = 0):
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.n_actions = len(self.rewards)
        self.obs_dim = obs_dim
        super().__init__(max_steps=max_steps, seed=seed)

    def _reset_state(self):
        pass

    def _set_internal(self, values):
        pass

    def observe(self):
        return np.ones(self.obs_dim)

    def _advance(self, action):
        return float(self.rewards[action]), False


def state_of(env: Env):
    if not hasattr(env, "state"):
        raise EnvError("env has no state yet; call reset()")
    return env.state
