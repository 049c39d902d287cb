"""Environments: classic control dynamics and tabular MDP oracles."""
from __future__ import annotations

from ..numcore.prng import Prng
from .classic import (
    Acrobot,
    CartPole,
    Env,
    EnvError,
    MountainCar,
    StepResult,
    acrobot_step,
    cartpole_step,
    env_reset,
    mountaincar_step,
)
from .tabular import (
    BanditEnv,
    ConvergenceError,
    TabularEnv,
    TabularMdp,
    bellman_optimal,
    chain_mdp,
    greedy_policy,
    mdp_policy_eval,
    mdp_value_iteration,
    random_mdp,
)

ENV_NAMES = ("cartpole", "mountaincar", "acrobot", "chain", "random-mdp", "bandit")


def make_env(name: str, seed: int = 0, max_steps: int | None = None, **kwargs) -> Env:
    """Build an env by its config name."""
    key = name.lower()
    if key == "cartpole":
        return CartPole(max_steps=max_steps, seed=seed)
    if key == "mountaincar":
        return MountainCar(max_steps=max_steps, seed=seed)
    if key == "acrobot":
        return Acrobot(max_steps=max_steps, seed=seed)
    if key == "chain":
        mdp = chain_mdp(kwargs.get("n_states", 5), kwargs.get("gamma", 0.9))
        return TabularEnv(mdp, start_state=0, max_steps=max_steps or 50, seed=seed, name="chain")
    if key == "random-mdp":
        mdp = random_mdp(kwargs.get("n_states", 5), kwargs.get("n_actions", 3), kwargs.get("gamma", 0.9),
                         Prng(kwargs.get("mdp_seed", 0)))
        return TabularEnv(mdp, start_state=None, max_steps=max_steps or 100, seed=seed, name="random-mdp")
    if key == "bandit":
        return BanditEnv(kwargs.get("rewards", (1.0, 0.0)), obs_dim=kwargs.get("obs_dim", 4),
                         max_steps=max_steps or 50, seed=seed)
    raise ValueError(f"unknown env {name!r}; expected one of {', '.join(ENV_NAMES)}")


__all__ = [
    "Acrobot", "BanditEnv", "CartPole", "ConvergenceError", "ENV_NAMES", "Env", "EnvError",
    "MountainCar", "StepResult", "TabularEnv", "TabularMdp", "acrobot_step", "bellman_optimal",
    "cartpole_step", "chain_mdp", "env_reset", "greedy_policy", "make_env", "mdp_policy_eval",
    "mdp_value_iteration", "mountaincar_step", "random_mdp",
]
