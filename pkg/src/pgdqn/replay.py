"""Fixed-capacity FIFO experience replay with uniform sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numcore.prng import Prng


@dataclass(slots=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool = False
    truncated: bool = False


@dataclass(slots=True)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    truncateds: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return len(self.actions)


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, n_actions: int | None = None):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.n_actions = n_actions
        self.states = np.zeros((capacity, obs_dim))
        self.next_states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.truncateds = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition) -> None:
        if self.n_actions is not None and not 0 <= t.action < self.n_actions:
            raise ValueError(f"action {t.action} outside [0, {self.n_actions})")
        if not np.isfinite(t.reward):
            raise ValueError("reward must be finite")
        i = self.cursor
        self.states[i] = t.state
        self.next_states[i] = t.next_state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.terminals[i] = t.terminal
        self.truncateds[i] = t.truncated
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _slot(self, age_rank: int) -> int:
        """Storage slot of the ``age_rank``-th oldest entry."""
        start = self.cursor if self.size == self.capacity else 0
        return (start + age_rank) % self.capacity

    def get(self, age_rank: int) -> Transition:
        i = self._slot(age_rank)
        return Transition(self.states[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                          self.next_states[i].copy(), bool(self.terminals[i]), bool(self.truncateds[i]))

    def sample(self, n: int, rng: Prng, replace: bool = True) -> Batch:
        if n <= 0:
            raise ValueError("batch size must be positive")
        if self.size == 0 or (not replace and n > self.size):
            raise ValueError(f"cannot sample {n} transitions from a buffer holding {self.size}"
                             + ("" if replace else " without replacement"))
        if replace:
            idx = [rng.randint(self.size) for _ in range(n)]
        else:
            # partial Fisher-Yates over age ranks
            pool = list(range(self.size))
            for k in range(n):
                j = k + rng.randint(self.size - k)
                pool[k], pool[j] = pool[j], pool[k]
            idx = pool[:n]
        slots = np.array([self._slot(i) for i in idx], dtype=np.int64)
        return Batch(self.states[slots], self.actions[slots], self.rewards[slots],
                     self.next_states[slots], self.terminals[slots], self.truncateds[slots], slots)


def push(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.push(transition)


def sample(buffer: ReplayBuffer, n: int, rng: Prng) -> Batch:
    return buffer.sample(n, rng)
