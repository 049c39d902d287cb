"""Tape-based reverse-mode differentiation over float64 numpy arrays.

Every op accepts either plain arrays or :class:`Var` nodes. With no ``Var``
among the inputs, an op just computes its value, so one network definition
serves both inference and training.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class TapeError(RuntimeError):
    pass


class Var:
    __slots__ = ("value", "tape", "idx")
    __array_priority__ = 100.0  # make ndarray (op) Var defer to Var

    def __init__(self, value: np.ndarray, tape: "Tape", idx: int):
        self.value = value
        self.tape = tape
        self.idx = idx

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, idx={self.idx})"


class Tape:
    """Single-use record of primitive ops, in execution (topological) order."""

    def __init__(self):
        self._values: list[np.ndarray] = []
        self._parents: list[tuple[int, ...]] = []
        self._backward: list[Callable | None] = []
        self._params: dict[str, int] = {}
        self.consumed = False

    def __len__(self):
        return len(self._values)

    def _record(self, value, parents, backward) -> Var:
        if self.consumed:
            raise TapeError("tape already consumed by backward(); record a fresh one")
        idx = len(self._values)
        self._values.append(value)
        self._parents.append(parents)
        self._backward.append(backward)
        return Var(value, self, idx)

    def param(self, name: str, value: np.ndarray) -> Var:
        if name in self._params:
            raise TapeError(f"parameter {name!r} registered twice")
        var = self._record(np.asarray(value, dtype=np.float64), (), None)
        self._params[name] = var.idx
        return var

    def params(self, named: dict[str, np.ndarray]) -> dict[str, Var]:
        return {k: self.param(k, v) for k, v in named.items()}

    def backward(self, loss: Var) -> dict[str, np.ndarray]:
        """Gradients of scalar ``loss`` for every registered parameter.

        Parameters the loss does not depend on get exact zeros.
        """
        if self.consumed:
            raise TapeError("backward() already ran on this tape")
        if not isinstance(loss, Var) or loss.tape is not self:
            raise TapeError("loss must be a Var recorded on this tape")
        if loss.value.size != 1:
            raise TapeError(f"loss must be scalar, got shape {loss.value.shape}")
        self.consumed = True
        grads: dict[int, np.ndarray] = {loss.idx: np.ones_like(loss.value)}
        for i in range(loss.idx, -1, -1):
            g = grads.get(i)
            if g is None or self._backward[i] is None:
                continue
            parent_grads = self._backward[i](g)
            for p, pg in zip(self._parents[i], parent_grads):
                if pg is None:
                    continue
                if p in grads:
                    grads[p] = grads[p] + pg
                else:
                    grads[p] = pg
        out = {}
        for name, idx in self._params.items():
            g = grads.get(idx)
            out[name] = np.zeros_like(self._values[idx]) if g is None else g
        return out


def backward(tape: Tape, loss: Var) -> dict[str, np.ndarray]:
    return tape.backward(loss)


def value(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*xs) -> Tape | None:
    tape = None
    for x in xs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise TapeError("operands recorded on different tapes")
    return tape


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _emit(tape, out, inputs: Sequence, backward):
    """Record ``out`` with grads only routed to the Var inputs."""
    if tape is None:
        return out
    var_pos = [i for i, x in enumerate(inputs) if isinstance(x, Var)]
    parents = tuple(inputs[i].idx for i in var_pos)

    def bw(g):
        full = backward(g)
        return [full[i] for i in var_pos]

    return tape._record(out, parents, bw)


def add(a, b):
    av, bv = value(a), value(b)
    out = av + bv
    return _emit(_tape_of(a, b), out, (a, b),
                 lambda g: (_unbroadcast(g, np.shape(av)), _unbroadcast(g, np.shape(bv))))


def sub(a, b):
    av, bv = value(a), value(b)
    out = av - bv
    return _emit(_tape_of(a, b), out, (a, b),
                 lambda g: (_unbroadcast(g, np.shape(av)), _unbroadcast(-g, np.shape(bv))))


def mul(a, b):
    av, bv = value(a), value(b)
    out = av * bv
    return _emit(_tape_of(a, b), out, (a, b),
                 lambda g: (_unbroadcast(g * bv, np.shape(av)), _unbroadcast(g * av, np.shape(bv))))


def matmul(a, b):
    av, bv = value(a), value(b)
    out = av @ bv

    def bw(g):
        ga = g @ bv.T if bv.ndim == 2 else np.outer(g, bv)
        if av.ndim == 1:
            gb = np.outer(av, g)
        else:
            gb = av.T @ g
        return ga, gb

    return _emit(_tape_of(a, b), out, (a, b), bw)


def linear(x, w, b):
    """``x @ w.T + b`` for weight ``w`` of shape (out, in)."""
    xv, wv, bv = value(x), value(w), value(b)
    out = xv @ wv.T + bv

    def bw(g):
        gx = g @ wv
        if xv.ndim == 1:
            gw = np.outer(g, xv)
            gb = g
        else:
            gw = g.T @ xv
            gb = g.sum(axis=0)
        return gx, gw, gb

    return _emit(_tape_of(x, w, b), out, (x, w, b), bw)


def relu(x):
    xv = value(x)
    mask = xv > 0
    out = np.where(mask, xv, 0.0)
    return _emit(_tape_of(x), out, (x,), lambda g: (g * mask,))


def square(x):
    xv = value(x)
    return _emit(_tape_of(x), xv * xv, (x,), lambda g: (2.0 * xv * g,))


def exp(x):
    xv = value(x)
    out = np.exp(xv)
    return _emit(_tape_of(x), out, (x,), lambda g: (g * out,))


def log(x):
    xv = value(x)
    return _emit(_tape_of(x), np.log(xv), (x,), lambda g: (g / xv,))


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    xv = value(x)
    out = np.sum(xv, axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, xv.shape).copy(),)

    return _emit(_tape_of(x), np.asarray(out), (x,), bw)


def mean(x, axis=None, keepdims=False):
    xv = value(x)
    n = xv.size if axis is None else xv.shape[axis]
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def log_softmax(x):
    """Log-probabilities along the last axis via log-sum-exp."""
    xv = value(x)
    shifted = xv - xv.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    p = np.exp(out)
    return _emit(_tape_of(x), out, (x,),
                 lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def softmax(x):
    xv = value(x)
    shifted = xv - xv.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    return _emit(_tape_of(x), out, (x,),
                 lambda g: (out * (g - (g * out).sum(axis=-1, keepdims=True)),))


def gather(x, index):
    """Pick ``x[i, index[i]]`` per row (or ``x[index]`` for a vector)."""
    xv = value(x)
    index = np.asarray(index)
    if xv.ndim == 1:
        out = np.asarray(xv[index])
    else:
        rows = np.arange(xv.shape[0])
        out = xv[rows, index]

    def bw(g):
        gx = np.zeros_like(xv)
        if xv.ndim == 1:
            np.add.at(gx, index, g)
        else:
            gx[rows, index] = g
        return (gx,)

    return _emit(_tape_of(x), out, (x,), bw)


def stop_gradient(x):
    return np.array(value(x), copy=True)
