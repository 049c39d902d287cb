from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RMSPROP = "rmsprop"
ADAM = "adam"


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class OptimizerState:
    kind: str
    lr: float
    decay: float = 0.95  # RMSProp rho
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 0.01
    second: dict[str, np.ndarray] = field(default_factory=dict)
    first: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if self.kind not in (RMSPROP, ADAM):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")

    @classmethod
    def rmsprop(cls, lr: float, decay: float = 0.95, eps: float = 0.01) -> "OptimizerState":
        return cls(RMSPROP, lr, decay=decay, eps=eps)

    @classmethod
    def adam(cls, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "OptimizerState":
        return cls(ADAM, lr, beta1=beta1, beta2=beta2, eps=eps)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "lr": self.lr, "decay": self.decay, "beta1": self.beta1,
            "beta2": self.beta2, "eps": self.eps, "step": self.step,
        }


def _check_finite(grads: dict[str, np.ndarray]) -> None:
    for name, g in grads.items():
        # a finite sum implies finite entries (overflow is refused too)
        if not np.isfinite(g.sum()):
            raise NonFiniteGradient(f"non-finite gradient for {name!r}; step refused")


def rmsprop_step(state: OptimizerState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """In-place RMSProp descent; returns ``params`` for convenience.

    ``v <- rho v + (1 - rho) g^2``, ``p <- p - lr g / (sqrt(v) + eps)``.
    """
    if state.kind != RMSPROP:
        raise ValueError("rmsprop_step needs an RMSProp state")
    _check_finite(grads)
    rho, lr, eps = state.decay, state.lr, state.eps
    for name, g in grads.items():
        p = params[name]
        if p.shape != g.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        v = state.second.get(name)
        if v is None:
            v = state.second[name] = np.zeros_like(p)
        tmp = g * g
        tmp *= 1.0 - rho
        v *= rho
        v += tmp
        np.sqrt(v, out=tmp)
        tmp += eps
        np.divide(g, tmp, out=tmp)
        tmp *= lr
        p -= tmp
    state.step += 1
    return params


def adam_step(state: OptimizerState, param: float, grad: float) -> float:
    """Bias-corrected Adam descent on one scalar."""
    if state.kind != ADAM:
        raise ValueError("adam_step needs an Adam state")
    if not math.isfinite(grad):
        raise NonFiniteGradient("non-finite gradient; step refused")
    m = state.beta1 * float(state.first.get("x", 0.0)) + (1.0 - state.beta1) * grad
    v = state.beta2 * float(state.second.get("x", 0.0)) + (1.0 - state.beta2) * grad * grad
    state.first["x"] = m
    state.second["x"] = v
    state.step += 1
    m_hat = m / (1.0 - state.beta1 ** state.step)
    v_hat = v / (1.0 - state.beta2 ** state.step)
    return param - state.lr * m_hat / (math.sqrt(v_hat) + state.eps)
