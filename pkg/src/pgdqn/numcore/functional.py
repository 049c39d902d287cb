from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad

RELU = "relu"
IDENTITY = "identity"


def mlp_forward(layers: Sequence[tuple], activation: str, x, final_activation: str | None = None):
    """Dense stack ``y = act(W x + b)`` for each (W, b) in ``layers``.

    ``activation`` applies after every layer except the last, which uses
    ``final_activation`` (defaults to ``activation``). Works on arrays or
    tape variables.
    """
    if activation not in (RELU, IDENTITY):
        raise ValueError(f"unknown activation {activation!r}")
    last_act = activation if final_activation is None else final_activation
    h = x
    for i, (w, b) in enumerate(layers):
        w_shape = np.shape(ad.value(w))
        in_dim = np.shape(ad.value(h))[-1]
        if w_shape[1] != in_dim:
            raise ValueError(
                f"layer {i}: input width {in_dim} does not match weight shape {w_shape} (expects {w_shape[1]})"
            )
        h = ad.linear(h, w, b)
        act = last_act if i == len(layers) - 1 else activation
        if act == RELU:
            h = ad.relu(h)
    return h


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def entropy(dist) -> float:
    """Shannon entropy in nats, with 0 log 0 := 0."""
    p = np.asarray(dist, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("distribution has negative entries")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def entropy_from_logp(logp):
    """Differentiable entropy of the distribution with log-probabilities ``logp``."""
    p = ad.exp(logp)
    return ad.mul(ad.sum(ad.mul(p, logp), axis=-1), -1.0)


@dataclass
class GradCheckReport:
    max_error: float
    errors: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    nonfinite: list[int] = field(default_factory=list)

    def __float__(self):
        return self.max_error

    @property
    def ok(self) -> bool:
        return not self.nonfinite


def grad_check(
    fn: Callable[[np.ndarray], float],
    point,
    step: float = 1e-6,
    grad: Callable[[np.ndarray], np.ndarray] | np.ndarray | None = None,
) -> GradCheckReport:
    """Central-difference check of an analytic gradient.

    ``fn`` maps a flat float64 vector to a scalar. The analytic gradient is
    ``grad`` (array or callable); if omitted, ``fn`` must return
    ``(value, gradient)`` itself. Error per coordinate is
    ``|analytic - numeric| / max(1, |analytic|)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(point, dtype=np.float64).ravel()

    if grad is None:
        def f(v):
            return fn(v)[0]
        analytic = np.asarray(fn(x.copy())[1], dtype=np.float64).ravel()
    else:
        f = fn
        analytic = np.asarray(grad(x.copy()) if callable(grad) else grad, dtype=np.float64).ravel()
    if analytic.shape != x.shape:
        raise ValueError(f"gradient shape {analytic.shape} does not match point shape {x.shape}")

    numeric = np.empty_like(x)
    nonfinite = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        fp, fm = float(f(xp)), float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm) and np.isfinite(analytic[i])):
            nonfinite.append(i)
            numeric[i] = np.nan
            continue
        numeric[i] = (fp - fm) / (2.0 * step)
    errors = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    finite = np.isfinite(errors)
    max_error = float(errors[finite].max()) if finite.any() else float("nan")
    if nonfinite:
        max_error = float("inf")
    return GradCheckReport(max_error, errors, analytic, numeric, nonfinite)
