"""Action selection: preference-guided epsilon-greedy, schedules, sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numcore.prng import Prng


@dataclass(frozen=True)
class PolicyPmf:
    probs: np.ndarray
    greedy_action: int
    epsilon: float


def greedy_action(q) -> int:
    """argmax with ties broken toward the lowest index."""
    return int(np.argmax(q))


def pg_policy_pmf(q, eta, epsilon: float) -> PolicyPmf:
    """Greedy action w.p. 1 - eps, otherwise a draw from the preference ``eta``."""
    q = np.asarray(q, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    if q.shape != eta.shape or q.ndim != 1:
        raise ValueError(f"q {q.shape} and eta {eta.shape} must be equal-width vectors")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    if np.any(eta < -1e-9) or abs(eta.sum() - 1.0) > 1e-9:
        raise ValueError("eta is not a distribution")
    a_star = greedy_action(q)
    probs = epsilon * eta
    probs[a_star] += 1.0 - epsilon
    return PolicyPmf(probs, a_star, epsilon)


def epsilon_greedy_pmf(q, epsilon: float) -> PolicyPmf:
    n = len(q)
    return pg_policy_pmf(q, np.full(n, 1.0 / n), epsilon)


def sample_action(pmf: PolicyPmf | np.ndarray, rng: Prng) -> int:
    probs = pmf.probs if isinstance(pmf, PolicyPmf) else np.asarray(pmf)
    u = rng.random()
    acc = 0.0
    last = 0
    for a, p in enumerate(probs):
        if p <= 0.0:
            continue
        last = a
        acc += p
        if u < acc:
            return a
    return last


@dataclass(frozen=True)
class EpsilonSchedule:
    initial: float = 1.0
    final: float = 0.1
    horizon: int = 1_000_000

    def __post_init__(self):
        if not self.initial >= self.final > 0:
            raise ValueError("need initial >= final > 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    def __call__(self, step: int) -> float:
        return epsilon_at(self, step)


def epsilon_at(schedule: EpsilonSchedule, step: int) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    frac = min(step / schedule.horizon, 1.0)
    return schedule.initial + frac * (schedule.final - schedule.initial)
