"""Differentiable primitives.

Every op returns a new tensor and never mutates its inputs.  Gradients are
exact; non-smooth points use fixed subgradients: ``abs`` and ``relu`` take 0
at the kink, ``max`` routes the gradient to the first (lowest-index) argmax.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import ShapeMismatch, Tensor, as_tensor, make


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(op, a.shape, b.shape) from None


# -- elementwise arithmetic --------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def back(g, push):
        push(a, unbroadcast(g, a.shape))
        push(b, unbroadcast(g, b.shape))
    return make(a.data + b.data, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def back(g, push):
        push(a, unbroadcast(g, a.shape))
        push(b, unbroadcast(-g, b.shape))
    return make(a.data - b.data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def back(g, push):
        if a.requires_grad:
            push(a, unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            push(b, unbroadcast(g * a.data, b.shape))
    return make(a.data * b.data, (a, b), back)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    out = a.data / b.data

    def back(g, push):
        if a.requires_grad:
            push(a, unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            push(b, unbroadcast(-g * out / b.data, b.shape))
    return make(out, (a, b), back)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return make(a.data * c, (a,), lambda g, push: push(a, g * c))


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)  # sign(0) == 0: zero subgradient at the kink
    return make(np.abs(a.data), (a,), lambda g, push: push(a, g * sign))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return make(np.where(mask, a.data, 0.0), (a,), lambda g, push: push(a, g * mask))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return make(out, (a,), lambda g, push: push(a, g * out * (1.0 - out)))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make(out, (a,), lambda g, push: push(a, g * (1.0 - out * out)))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)

    def back(g, push):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(out > 0, 0.5 / np.where(out > 0, out, 1.0), 0.0)
        push(a, g * d)
    return make(out, (a,), back)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make(out, (a,), lambda g, push: push(a, g * out))


def log(a) -> Tensor:
    a = as_tensor(a)
    return make(np.log(a.data), (a,), lambda g, push: push(a, g / a.data))


def softplus(a) -> Tensor:
    """log(1 + exp(a)), computed without overflow."""
    a = as_tensor(a)
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return make(out, (a,), lambda g, push: push(a, g * _sigmoid(x)))


def log_sigmoid(a) -> Tensor:
    return scale(softplus(scale(a, -1.0)), -1.0)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# -- reductions ----------------------------------------------------------------

def sum(a, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)
    out = a.data.sum(axis=axis)

    def back(g, push):
        if axis is None:
            push(a, np.broadcast_to(g, a.shape))
        else:
            push(a, np.broadcast_to(np.expand_dims(g, axis), a.shape))
    return make(out, (a,), back)


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return scale(sum(a, axis), 1.0 / n)


def max(a, axis=-1) -> Tensor:  # noqa: A001
    """Maximum along ``axis``; the gradient goes to the first maximizing entry."""
    a = as_tensor(a)
    axis = axis % a.ndim
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis).squeeze(axis)

    def back(g, push):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
        push(a, full)
    return make(out, (a,), back)


def softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g, push):
        push(a, out * (g - (g * out).sum(axis=axis, keepdims=True)))
    return make(out, (a,), back)


def log_softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse

    def back(g, push):
        push(a, g - np.exp(out) * g.sum(axis=axis, keepdims=True))
    return make(out, (a,), back)


# -- linear algebra --------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """numpy ``@`` semantics for 1-D and 2-D operands."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    out = a.data @ b.data

    def back(g, push):
        A = a.data if a.ndim == 2 else a.data[None, :]
        B = b.data if b.ndim == 2 else b.data[:, None]
        G = g.reshape(A.shape[0], B.shape[1])
        if a.requires_grad:
            push(a, (G @ B.T).reshape(a.shape))
        if b.requires_grad:
            push(b, (A.T @ G).reshape(b.shape))
    return make(out, (a, b), back)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return make(a.data.T, (a,), lambda g, push: push(a, g.T))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeMismatch("reshape", a.shape, shape) from None
    return make(out, (a,), lambda g, push: push(a, g.reshape(a.shape)))


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeMismatch("broadcast_to", a.shape, shape) from None
    return make(out, (a,), lambda g, push: push(a, unbroadcast(g, a.shape)))


def affine(x, W, b=None) -> Tensor:
    """``x @ W.T + b`` for a vector or a batch of row vectors."""
    out = matmul(x, transpose(W))
    return out if b is None else add(out, b)


def bilinear(a, W, b) -> Tensor:
    """``a W b^T``: scalar for vectors, (n, m) matrix for row batches."""
    a, W, b = as_tensor(a), as_tensor(W), as_tensor(b)
    if a.shape[-1] != W.shape[0] or W.shape[1] != b.shape[-1]:
        raise ShapeMismatch("bilinear", a.shape, W.shape, b.shape)
    A = a.data if a.ndim == 2 else a.data[None, :]
    B = b.data if b.ndim == 2 else b.data[None, :]
    AW = A @ W.data
    out = AW @ B.T
    shape_out = out.shape
    if a.ndim == 1 and b.ndim == 1:
        out = out[0, 0]
    elif a.ndim == 1:
        out = out[0]
    elif b.ndim == 1:
        out = out[:, 0]

    def back(g, push):
        G = np.asarray(g).reshape(shape_out)
        if a.requires_grad:
            push(a, (G @ B @ W.data.T).reshape(a.shape))
        if W.requires_grad:
            push(W, A.T @ G @ B)
        if b.requires_grad:
            push(b, (G.T @ AW).reshape(b.shape))
    return make(np.asarray(out), (a, W, b), back)


# -- structure -----------------------------------------------------------------------

def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeMismatch("concat", *[p.shape for p in parts]) from None
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def back(g, push):
        for p, gp in zip(parts, np.split(g, sizes, axis=axis)):
            push(p, gp)
    return make(out, tuple(parts), back)


def stack(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    try:
        out = np.stack([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeMismatch("stack", *[p.shape for p in parts]) from None

    def back(g, push):
        for i, p in enumerate(parts):
            push(p, np.take(g, i, axis=axis))
    return make(out, tuple(parts), back)


def index(a, idx) -> Tensor:
    """``a[idx]`` for ints, slices and integer arrays (repeats accumulate)."""
    a = as_tensor(a)
    out = a.data[idx]

    def back(g, push):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        push(a, full)
    return make(np.array(out, copy=True), (a,), back)


def rows(a, indices) -> Tensor:
    return index(a, np.asarray(indices, dtype=np.intp))


def pick(a, i: int) -> Tensor:
    """Scalar element ``a[i]`` of a vector."""
    return index(a, int(i))


OP_SET = {
    "add": add, "sub": sub, "mul": mul, "div": div, "scale": scale,
    "abs": absolute, "relu": relu, "sigmoid": sigmoid, "tanh": tanh, "sqrt": sqrt,
    "exp": exp, "log": log, "softplus": softplus, "log_sigmoid": log_sigmoid,
    "sum": sum, "mean": mean, "max": max, "softmax": softmax, "log_softmax": log_softmax,
    "matmul": matmul, "transpose": transpose, "reshape": reshape, "broadcast_to": broadcast_to,
    "affine": affine, "bilinear": bilinear, "concat": concat, "stack": stack, "index": index,
}


def op_set():
    """Catalog of differentiable primitives (LSTM ops live in :mod:`.lstm`)."""
    from . import lstm
    return dict(OP_SET, lstm_step=lstm.lstm_step, lstm_sequence=lstm.lstm_sequence)
