"""Per-step preference / Q exports from one greedy episode."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agents import DualNetwork
from ..envkit import Env, make_env
from ..numcore.functional import softmax


def minmax(q: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; constant input maps to zeros."""
    q = np.asarray(q, dtype=np.float64)
    lo, hi = q.min(), q.max()
    if hi - lo <= 0:
        return np.zeros_like(q)
    return (q - lo) / (hi - lo)


@dataclass
class HeatmapRecord:
    n_actions: int
    steps: list[int] = field(default_factory=list)
    eta: list[np.ndarray] = field(default_factory=list)
    q_norm: list[np.ndarray] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    q_raw: list[np.ndarray] = field(default_factory=list, repr=False)

    def columns(self) -> list[str]:
        n = self.n_actions
        return ["step", "action"] + [f"eta_{i}" for i in range(n)] + [f"q_norm_{i}" for i in range(n)]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for t, a, e, q in zip(self.steps, self.actions, self.eta, self.q_norm):
            w.writerow([t, a] + [repr(float(v)) for v in e] + [repr(float(v)) for v in q])
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.csv_text())
        return path


def read_heatmap_csv(path) -> HeatmapRecord:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty heat-map file")
    n = sum(1 for k in rows[0] if k.startswith("eta_"))
    rec = HeatmapRecord(n)
    for r in rows:
        rec.steps.append(int(r["step"]))
        rec.actions.append(int(r["action"]))
        rec.eta.append(np.array([float(r[f"eta_{i}"]) for i in range(n)]))
        rec.q_norm.append(np.array([float(r[f"q_norm_{i}"]) for i in range(n)]))
    return rec


def export_heatmap(net: DualNetwork, env: Env | str, seed: int = 0, max_steps: int | None = None,
                   path=None, normalize: str = "step", env_kwargs: dict | None = None) -> HeatmapRecord:
    """Run one greedy episode and record eta and min-max-normalized Q at every step.

    ``normalize="step"`` scales each Q row on its own; ``"episode"`` uses the
    min and max over the whole episode.
    """
    if not net.spec.preference:
        raise ValueError("heat-map export needs a network with a preference branch")
    if normalize not in ("step", "episode"):
        raise ValueError("normalize must be 'step' or 'episode'")
    if isinstance(env, str):
        env = make_env(env, seed=seed, max_steps=max_steps, **(env_kwargs or {}))
    elif max_steps is not None:
        env.max_steps = int(max_steps)
    obs = env.reset(seed)
    noise = net.zero_noise() if net.spec.noisy else None
    rec = HeatmapRecord(env.n_actions)
    t = 0
    while True:
        q, logits = net.forward_both(net.params, obs, noise)
        a = int(np.argmax(q))
        rec.steps.append(t)
        rec.eta.append(softmax(logits))
        rec.q_raw.append(np.asarray(q, dtype=np.float64))
        rec.actions.append(a)
        res = env.step(a)
        t += 1
        obs = res.next_state
        if res.done:
            break
    if normalize == "step":
        rec.q_norm = [minmax(q) for q in rec.q_raw]
    else:
        allq = np.stack(rec.q_raw)
        lo, hi = allq.min(), allq.max()
        span = hi - lo if hi > lo else 1.0
        rec.q_norm = [(q - lo) / span if hi > lo else np.zeros_like(q) for q in rec.q_raw]
    if path is not None:
        rec.write(path)
    return rec


def fixed_q_bandit_network(q, alpha: float, seed: int = 0, updates: int = 5_000, obs_dim: int = 4):
    """A preference net trained to convergence against fixed Q values.

    The Q head is a single layer with zero weights and bias = q, so the
    network's own Q output is exactly ``q``.
    """
    from ..numcore.prng import Prng
    from .theory import bandit_network, kl_fixed_point

    q = np.asarray(q, dtype=np.float64)
    net = bandit_network(q.size, Prng(seed), obs_dim=obs_dim)
    net.params["q.0.w"][...] = 0.0
    net.params["q.0.b"][...] = q
    net.sync_target()
    res = kl_fixed_point(q, alpha, max_updates=updates, net=net, stop_early=False)
    return net, res
