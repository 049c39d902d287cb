"""Interleaved act / learn loop shared by PGDQN and the baselines."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agents import DualNetwork, NetworkSpec, get_variant, save_checkpoint
from ..envkit import Env, EnvError, make_env
from ..numcore.functional import softmax
from ..numcore.optim import OptimizerState
from ..numcore.prng import Prng
from ..policy import EpsilonSchedule, epsilon_at, pg_policy_pmf, sample_action
from ..replay import ReplayBuffer, Transition
from .config import Hyperparameters
from .core import (
    TemperatureState,
    TrainingAborted,
    preference_update,
    q_target_value,
    q_update,
    temperature_update,
)

log = logging.getLogger(__name__)

RUNLOG_COLUMNS = ("seed", "episode", "frames", "return", "epsilon", "alpha", "entropy", "q_loss", "pref_obj")
EVAL_COLUMNS = ("seed", "frames", "mean_return", "min_return", "max_return")

# substream ids carved out of one run seed
STREAM_ENV, STREAM_EXPLORE, STREAM_REPLAY, STREAM_INIT_Q, STREAM_INIT_PREF, STREAM_NOISE, STREAM_EVAL = range(7)


def streams(seed: int) -> dict[str, Prng]:
    names = ("env", "explore", "replay", "init_q", "init_pref", "noise", "eval")
    return {n: Prng(seed, stream=i) for i, n in enumerate(names)}


@dataclass
class RunLog:
    seed: int
    variant: str
    env: str
    config: dict
    config_hash: str
    episodes: list[dict] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)
    n_pref_updates: int = 0
    n_q_updates: int = 0
    n_syncs: int = 0
    frames: int = 0
    threshold_frame: int | None = None
    aborted: str | None = None
    pref_update_steps: list[int] = field(default_factory=list, repr=False)
    q_update_steps: list[int] = field(default_factory=list, repr=False)
    sync_steps: list[int] = field(default_factory=list, repr=False)
    net: DualNetwork | None = field(default=None, repr=False, compare=False)

    def csv_text(self) -> str:
        return _rows_to_csv(RUNLOG_COLUMNS, self.episodes)

    def eval_csv_text(self) -> str:
        return _rows_to_csv(EVAL_COLUMNS, self.evals)

    def sidecar(self) -> dict:
        return {
            "seed": self.seed, "variant": self.variant, "env": self.env,
            "config": self.config, "config_hash": self.config_hash,
            "frames": self.frames, "episodes": len(self.episodes),
            "n_pref_updates": self.n_pref_updates, "n_q_updates": self.n_q_updates, "n_syncs": self.n_syncs,
            "threshold_frame": self.threshold_frame, "aborted": self.aborted,
        }

    def write(self, out_dir, stem: str | None = None) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or run_stem(self.env, self.variant, self.seed)
        paths = {
            "runlog": out / f"{stem}.csv",
            "eval": out / f"{stem}.eval.csv",
            "sidecar": out / f"{stem}.json",
        }
        paths["runlog"].write_text(self.csv_text())
        paths["eval"].write_text(self.eval_csv_text())
        paths["sidecar"].write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return paths


def run_stem(env: str, variant: str, seed: int) -> str:
    return f"{env}_{variant}_seed{seed}"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def read_runlog_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append({k: (float(v) if v not in ("", None) else math.nan) for k, v in r.items()})
    return rows


def _mean(xs) -> float:
    return float(sum(xs) / len(xs)) if xs else math.nan


def evaluate_greedy(net: DualNetwork, env_name: str, n_episodes: int, rng: Prng, episode_cap: int | None = None,
                    noise_rng: Prng | None = None) -> list[float]:
    """Greedy-argmax returns over ``n_episodes``; episodes are stepped in lockstep."""
    seeds = [rng.next_u64() for _ in range(n_episodes)]
    envs = [make_env(env_name, seed=s, max_steps=episode_cap) for s in seeds]
    obs = [e.reset() for e in envs]
    if net.spec.noisy:
        returns = []
        for e, o in zip(envs, obs):
            noise = net.sample_noise(noise_rng) if noise_rng is not None else net.zero_noise()
            total, done = 0.0, False
            while not done:
                a = int(np.argmax(net.q_forward(net.params, o, noise)))
                res = e.step(a)
                total += res.reward
                o, done = res.next_state, res.done
            returns.append(total)
        return returns
    returns = [0.0] * n_episodes
    active = list(range(n_episodes))
    while active:
        q = net.q_forward(net.params, np.stack([obs[i] for i in active]))
        acts = q.argmax(axis=1)
        still = []
        for i, a in zip(active, acts):
            res = envs[i].step(int(a))
            returns[i] += res.reward
            obs[i] = res.next_state
            if not res.done:
                still.append(i)
        active = still
    return returns


def build_network(hp: Hyperparameters, env: Env, rngs: dict[str, Prng]) -> DualNetwork:
    variant = get_variant(hp.variant)
    spec = NetworkSpec.for_variant(variant, env.obs_dim, env.n_actions, embed_sizes=hp.embed_sizes,
                                   head_hidden=hp.head_hidden, share_embedding=hp.share_embedding)
    return DualNetwork.build(spec, rngs["init_q"], rngs["init_pref"])


def train(hp: Hyperparameters, env_name: str, seed: int, checkpoint_path=None, env_kwargs: dict | None = None,
          batch_hook=None) -> RunLog:
    """Run one (variant, env, seed) training job; fully deterministic.

    ``batch_hook(step, batch)`` is called with each sampled Q minibatch
    (used by trajectory-comparison tests).
    """
    hp.validate()
    variant = get_variant(hp.variant)
    rngs = streams(seed)
    env = make_env(env_name, seed=rngs["env"].next_u64(), max_steps=hp.episode_cap, **(env_kwargs or {}))
    net = build_network(hp, env, rngs)
    runlog = RunLog(seed, variant.name, env_name, hp.to_dict(), hp.config_hash())
    replay = ReplayBuffer(hp.replay_capacity, env.obs_dim, env.n_actions)
    opt_q = OptimizerState.rmsprop(hp.lr_q, hp.rmsprop_decay, hp.rmsprop_eps)
    opt_pref = OptimizerState.rmsprop(hp.lr_pref, hp.rmsprop_decay, hp.rmsprop_eps)
    temp = TemperatureState.create(hp.alpha_init, hp.resolved_target_entropy(env.n_actions), hp.lr_alpha,
                                   hp.adam_beta1, hp.adam_beta2, hp.adam_eps)
    schedule = EpsilonSchedule(hp.eps_initial, hp.eps_final, hp.eps_horizon)
    target_rule = variant.target_rule
    uniform = np.full(env.n_actions, 1.0 / env.n_actions)
    guided = variant.dual and hp.exploration_override is None

    t = 0
    episode = 0
    stop = False
    try:
        while not stop:
            if hp.max_episodes is not None and episode >= hp.max_episodes:
                break
            if t >= hp.max_steps:
                break
            s = env.reset()
            ep_return, q_losses, pref_objs, ents = 0.0, [], [], []
            while True:
                eps = epsilon_at(schedule, t)
                if variant.exploration == "noisy":
                    noise = net.sample_noise(rngs["noise"])
                    a = int(np.argmax(net.q_forward(net.params, s, noise)))
                elif guided:
                    q, logits = net.forward_both(net.params, s)
                    a = sample_action(pg_policy_pmf(q, softmax(logits), eps), rngs["explore"])
                else:
                    q = net.q_forward(net.params, s)
                    a = sample_action(pg_policy_pmf(q, uniform, eps), rngs["explore"])
                res = env.step(a)
                t += 1
                r = res.reward
                if not math.isfinite(r):
                    raise TrainingAborted(f"env returned non-finite reward {r}")
                if hp.reward_clip is not None:
                    r = float(np.clip(r, -hp.reward_clip, hp.reward_clip))
                ep_return += res.reward
                replay.push(Transition(s, a, r, res.next_state, res.terminal, res.truncated))

                if variant.dual and t % hp.tau_pref == 0:
                    obj, ent = preference_update(net, s, a, temp.alpha, opt_pref, hp.pref_grad_mode,
                                                 grad_clip=hp.grad_clip)
                    temperature_update(temp, ent)
                    pref_objs.append(obj)
                    ents.append(ent)
                    runlog.n_pref_updates += 1
                    runlog.pref_update_steps.append(t)

                if t >= hp.learning_start and t % hp.tau_q == 0 and len(replay) >= hp.batch_size:
                    batch = replay.sample(hp.batch_size, rngs["replay"], replace=hp.replay_replace)
                    if batch_hook is not None:
                        batch_hook(t, batch)
                    if variant.exploration == "noisy":
                        n_online = net.sample_noise(rngs["noise"])
                        n_target = net.sample_noise(rngs["noise"])
                        n_eval = net.sample_noise(rngs["noise"])
                    else:
                        n_online = n_target = n_eval = None
                    y = q_target_value(batch, net, hp.gamma, target_rule, noise_target=n_target, noise_online=n_eval)
                    q_losses.append(q_update(net, batch, y, opt_q, noise=n_online, grad_clip=hp.grad_clip))
                    runlog.n_q_updates += 1
                    runlog.q_update_steps.append(t)

                if t % hp.tau_target == 0:
                    net.sync_target()
                    runlog.n_syncs += 1
                    runlog.sync_steps.append(t)

                if hp.eval_every and t % hp.eval_every == 0:
                    rets = evaluate_greedy(net, env_name, hp.eval_episodes, rngs["eval"], hp.episode_cap,
                                           noise_rng=rngs["noise"] if net.spec.noisy else None)
                    mean_ret = _mean(rets)
                    runlog.evals.append({"seed": seed, "frames": t, "mean_return": mean_ret,
                                         "min_return": min(rets), "max_return": max(rets)})
                    if hp.stop_threshold is not None and mean_ret >= hp.stop_threshold and runlog.threshold_frame is None:
                        runlog.threshold_frame = t
                        stop = True

                s = res.next_state
                if res.done or stop or t >= hp.max_steps:
                    break
            runlog.episodes.append({
                "seed": seed, "episode": episode, "frames": t, "return": ep_return, "epsilon": eps,
                "alpha": temp.alpha if variant.dual else math.nan,
                "entropy": _mean(ents), "q_loss": _mean(q_losses), "pref_obj": _mean(pref_objs),
            })
            episode += 1
    except (TrainingAborted, FloatingPointError, EnvError) as exc:
        runlog.aborted = str(exc)
        runlog.frames = t
        raise TrainingAborted(f"run aborted at step {t}: {exc}", runlog) from exc
    runlog.frames = t
    runlog.net = net
    if checkpoint_path is not None:
        save_checkpoint(net, checkpoint_path, meta={"env": env_name, "variant": variant.name, "seed": seed,
                                                    "config_hash": runlog.config_hash})
    return runlog
