"""The three learning rules: Q regression, preference ascent, temperature descent."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..agents import DualNetwork
from ..numcore import autodiff as ad
from ..numcore.functional import entropy_from_logp, log_softmax
from ..numcore.optim import OptimizerState, adam_step, rmsprop_step
from ..replay import Batch


class TrainingAborted(RuntimeError):
    def __init__(self, message, runlog=None):
        super().__init__(message)
        self.runlog = runlog


def q_target_value(batch: Batch, net: DualNetwork, gamma: float, target_rule: str = "max",
                   noise_target=None, noise_online=None) -> np.ndarray:
    """One-step bootstrap targets; bootstrapping is masked on terminal transitions only."""
    next_q_target = net.q_forward(net.target, batch.next_states, noise_target)
    if target_rule == "max":
        boot = next_q_target.max(axis=1)
    elif target_rule == "double":
        next_q_online = net.q_forward(net.params, batch.next_states, noise_online)
        a = next_q_online.argmax(axis=1)
        boot = next_q_target[np.arange(len(a)), a]
    else:
        raise ValueError(f"unknown target rule {target_rule!r}")
    return batch.rewards + gamma * np.where(batch.terminals, 0.0, boot)


def q_loss_and_grads(net: DualNetwork, states, actions, targets, names=None, noise=None):
    """Mean squared TD error and its gradient for the named parameters (default: theta)."""
    names = net.theta_names if names is None else names
    tape = ad.Tape()
    p = dict(net.params)
    p.update(tape.params({n: net.params[n] for n in names}))
    q = net.q_forward(p, np.asarray(states, dtype=np.float64), noise)
    q_sa = ad.gather(q, np.asarray(actions))
    diff = ad.sub(q_sa, np.asarray(targets, dtype=np.float64))
    loss = ad.mean(ad.square(diff))
    grads = tape.backward(loss)
    return float(loss.value), grads


def _clip(grads, max_norm):
    if max_norm is None:
        return grads
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        grads = {k: g * scale for k, g in grads.items()}
    return grads


def q_update(net: DualNetwork, batch: Batch, targets, optimizer: OptimizerState, noise=None,
             grad_clip: float | None = None) -> float:
    loss, grads = q_loss_and_grads(net, batch.states, batch.actions, targets, noise=noise)
    if not math.isfinite(loss):
        raise TrainingAborted(f"non-finite Q loss {loss}")
    grads = _clip(grads, grad_clip)
    rmsprop_step(optimizer, {"theta": net.flat_view("theta")}, {"theta": net.flat_grad(grads, "theta")})
    return loss


def frozen_advantage(q: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """A(s, .) = Q(s, .) - sum_b eta(b|s) Q(s, b), as a constant."""
    return q - (eta * q).sum(axis=-1, keepdims=True)


def preference_objective(net: DualNetwork, state, action, alpha: float, mode: str = "expected",
                         names=None, q=None):
    """Surrogate, its entropy term and gradients for ``names`` (default: phi).

    ``q`` overrides the Q-branch output (used by fixed-Q diagnostics); it is
    always treated as a constant, and so is the advantage.
    """
    names = net.phi_names if names is None else names
    x = np.asarray(state, dtype=np.float64)
    if q is None:
        q = net.q_forward(net.params, x)
    q = np.asarray(q, dtype=np.float64)
    tape = ad.Tape()
    p = dict(net.params)
    p.update(tape.params({n: net.params[n] for n in names}))
    logits = net.logits_forward(p, x)
    logp = ad.log_softmax(logits)
    eta = np.exp(log_softmax(ad.value(logits)))
    adv = frozen_advantage(q, eta)
    ent = entropy_from_logp(logp)
    if mode == "expected":
        gain = ad.sum(ad.mul(ad.exp(logp), adv), axis=-1)
    elif mode == "sampled":
        a = np.asarray(action)
        gain = ad.mul(ad.gather(logp, a), ad.gather(adv, a))
    else:
        raise ValueError(f"unknown preference gradient mode {mode!r}")
    surrogate = ad.add(gain, ad.mul(ent, alpha))
    if np.ndim(ad.value(surrogate)) > 0:
        surrogate = ad.mean(surrogate)
        ent_val = float(np.mean(ad.value(ent)))
    else:
        ent_val = float(ad.value(ent))
    loss = ad.mul(surrogate, -1.0)
    grads = tape.backward(loss)
    # report the gradient of the surrogate (ascent direction)
    grads = {k: -g for k, g in grads.items()}
    return float(ad.value(surrogate)), ent_val, grads


def preference_update(net: DualNetwork, state, sampled_action, alpha: float, optimizer: OptimizerState,
                      mode: str = "expected", q=None, grad_clip: float | None = None) -> tuple[float, float]:
    """One ascent step on phi; returns the pre-step (objective, entropy)."""
    obj, ent, grads = preference_objective(net, state, sampled_action, alpha, mode, q=q)
    if not math.isfinite(obj):
        raise TrainingAborted(f"non-finite preference objective {obj}")
    descent = _clip(grads, grad_clip)
    flat = net.flat_grad(descent, "phi")
    flat *= -1.0
    rmsprop_step(optimizer, {"phi": net.flat_view("phi")}, {"phi": flat})
    return obj, ent


@dataclass
class TemperatureState:
    log_alpha: float
    target_entropy: float
    optimizer: OptimizerState = field(default_factory=lambda: OptimizerState.adam(0.00025))

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    @classmethod
    def create(cls, alpha_init: float, target_entropy: float, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(math.log(alpha_init), target_entropy, OptimizerState.adam(lr, beta1, beta2, eps))


def temperature_update(temp: TemperatureState, entropy_observed: float, optimizer: OptimizerState | None = None) -> float:
    """Adam descent on L(alpha) = alpha (H - xi), parameterized by log alpha."""
    opt = temp.optimizer if optimizer is None else optimizer
    grad = temp.alpha * (entropy_observed - temp.target_entropy)
    temp.log_alpha = adam_step(opt, temp.log_alpha, grad)
    return temp.alpha
