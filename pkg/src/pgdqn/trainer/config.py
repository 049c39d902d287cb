"""Hyperparameter records and the two named profiles."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

from ..agents import get_variant

PROFILES = ("control-default", "paper-atari")


@dataclass
class Hyperparameters:
    variant: str = "PGDQN"
    batch_size: int = 32
    replay_capacity: int = 50_000
    learning_start: int = 1_000
    replay_replace: bool = True
    gamma: float = 0.99
    tau_pref: int = 4
    tau_q: int = 4
    tau_target: int = 10_000
    lr_q: float = 0.00025
    lr_pref: float = 0.00025
    lr_alpha: float = 0.00025
    rmsprop_decay: float = 0.95
    rmsprop_eps: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eps_initial: float = 1.0
    eps_final: float = 0.1
    eps_horizon: int = 1_000_000
    target_entropy: float | None = None  # None -> target_entropy_scale * log|A|
    target_entropy_scale: float = 0.5
    alpha_init: float = 1.0
    pref_grad_mode: str = "expected"
    advantage: str = "frozen"
    share_embedding: bool = True
    exploration_override: str | None = None
    embed_sizes: tuple[int, ...] = (128, 128)
    head_hidden: tuple[int, ...] = (128,)
    max_steps: int = 60_000
    max_episodes: int | None = None
    episode_cap: int | None = None
    eval_every: int = 0
    eval_episodes: int = 20
    stop_threshold: float | None = None
    reward_clip: float | None = None
    grad_clip: float | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        self.embed_sizes = tuple(self.embed_sizes)
        self.head_hidden = tuple(self.head_hidden)
        self.seeds = tuple(self.seeds)
        self.validate()

    def validate(self) -> None:
        get_variant(self.variant)
        for name in ("lr_q", "lr_pref", "lr_alpha", "alpha_init"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("tau_pref", "tau_q", "tau_target", "batch_size", "replay_capacity", "eps_horizon"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise ValueError(f"{name} must be a positive integer")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.pref_grad_mode not in ("expected", "sampled"):
            raise ValueError("pref_grad_mode must be 'expected' or 'sampled'")
        if self.advantage != "frozen":
            raise ValueError("only the frozen advantage treatment is supported")
        if self.exploration_override not in (None, "epsilon-greedy"):
            raise ValueError("exploration_override must be null or 'epsilon-greedy'")
        if not 0.0 <= self.target_entropy_scale <= 1.0:
            raise ValueError("target_entropy_scale must lie in [0, 1]")
        if not self.eps_initial >= self.eps_final > 0:
            raise ValueError("need eps_initial >= eps_final > 0")

    def resolved_target_entropy(self, n_actions: int) -> float:
        if self.target_entropy is None:
            return self.target_entropy_scale * math.log(n_actions)
        return float(self.target_entropy)

    def replace(self, **kw) -> "Hyperparameters":
        return apply_overrides(self, kw)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        for k in ("embed_sizes", "head_hidden", "seeds"):
            d[k] = list(d[k])
        return d

    def config_hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


_FIELDS = {f.name: f for f in dataclasses.fields(Hyperparameters)}


def apply_overrides(hp: Hyperparameters, overrides: dict[str, Any]) -> Hyperparameters:
    unknown = set(overrides) - set(_FIELDS)
    if unknown:
        raise KeyError(f"unknown hyperparameter(s): {', '.join(sorted(unknown))}")
    return dataclasses.replace(hp, **overrides)


def parse_override(text: str) -> tuple[str, Any]:
    """``key=value`` with the value read as JSON when possible."""
    if "=" not in text:
        raise ValueError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key, val


# Classic Control values are tuned for desk-scale runs; paper-atari keeps
# the standard Atari settings as-is.
_PROFILE_VALUES = {
    "control-default": dict(
        replay_capacity=50_000, learning_start=1_000, gamma=0.99,
        tau_pref=4, tau_q=1, tau_target=500,
        lr_q=0.001, lr_pref=0.001, lr_alpha=0.00025,
        rmsprop_eps=1e-5, target_entropy_scale=0.9,
        eps_initial=1.0, eps_final=0.1, eps_horizon=10_000,
        embed_sizes=(128, 128), head_hidden=(128,),
        max_steps=60_000, eval_every=2_000, eval_episodes=20,
    ),
    "paper-atari": dict(
        batch_size=32, replay_capacity=1_000_000, learning_start=50_000, gamma=0.99,
        tau_pref=4, tau_q=4, tau_target=10_000,
        lr_q=0.00025, lr_pref=0.00025, lr_alpha=0.00025,
        eps_initial=1.0, eps_final=0.1, eps_horizon=1_000_000,
        max_steps=30_000_000, reward_clip=1.0,
    ),
}


def profile(name: str, **overrides) -> Hyperparameters:
    if name not in _PROFILE_VALUES:
        raise ValueError(f"unknown profile {name!r}; expected one of {', '.join(PROFILES)}")
    values = dict(_PROFILE_VALUES[name])
    values.update(overrides)
    return apply_overrides(Hyperparameters(), values)
