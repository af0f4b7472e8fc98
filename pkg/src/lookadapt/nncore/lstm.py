"""Fused LSTM operations on top of the recurrence kernels."""
from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from . import kernels, ops
from .tensor import ShapeMismatch, Tensor, as_tensor, make


def _check(x_dim, Wx, Wh, b):
    H4, d_in = Wx.shape
    if H4 % 4 or Wh.shape != (H4, H4 // 4) or b.shape != (H4,) or d_in != x_dim:
        raise ShapeMismatch("lstm", (x_dim,), Wx.shape, Wh.shape, b.shape)
    return H4 // 4


def _recurrence(Zx: Tensor, Wh: Tensor, h0: Tensor, c0: Tensor, with_cell: bool = False) -> Tensor:
    """Hidden states of the recurrence; with ``with_cell`` the last cell state is appended as a row."""
    H, C, G = kernels.lstm_forward(Zx.data, Wh.data, h0.data, c0.data)
    out = np.vstack([H, C[-1:]]) if with_cell else H

    def back(g, push):
        dH = g[:-1] if with_cell else g
        dC_last = g[-1] if with_cell else np.zeros(H.shape[1], dtype=H.dtype)
        dZ, dh0, dc0 = kernels.lstm_backward(dH, dC_last, Wh.data, C, G, c0.data)
        push(Zx, dZ)
        if Wh.requires_grad:
            Hprev = np.vstack([h0.data[None, :], H[:-1]])
            push(Wh, dZ.T @ Hprev)
        push(h0, dh0)
        push(c0, dc0)
    return make(out, (Zx, Wh, h0, c0), back)


def lstm_sequence(X, Wx, Wh, b, h0=None, c0=None, reverse: bool = False) -> Tensor:
    """Run an LSTM over the rows of ``X`` (T, d_in); returns hidden states (T, d_h) in input order."""
    X, Wx, Wh, b = (as_tensor(t) for t in (X, Wx, Wh, b))
    if X.ndim != 2 or X.shape[0] == 0:
        raise ShapeMismatch("lstm_sequence", X.shape)
    Hn = _check(X.shape[1], Wx, Wh, b)
    zeros = np.zeros(Hn, dtype=X.data.dtype)
    h0 = as_tensor(zeros if h0 is None else h0)
    c0 = as_tensor(zeros if c0 is None else c0)
    Zx = ops.affine(X, Wx, b)
    if reverse:
        flip = slice(None, None, -1)
        return ops.index(_recurrence(ops.index(Zx, flip), Wh, h0, c0), flip)
    return _recurrence(Zx, Wh, h0, c0)


def lstm_step(x, state: Tuple, Wx, Wh, b) -> Tuple[Tensor, Tensor]:
    """One LSTM cell update: (h, c) -> (h', c')."""
    x, Wx, Wh, b = (as_tensor(t) for t in (x, Wx, Wh, b))
    h, c = (as_tensor(s) for s in state)
    if x.ndim != 1:
        raise ShapeMismatch("lstm_step", x.shape)
    Hn = _check(x.shape[0], Wx, Wh, b)
    if h.shape != (Hn,) or c.shape != (Hn,):
        raise ShapeMismatch("lstm_step", h.shape, c.shape, (Hn,))
    z = ops.reshape(ops.affine(x, Wx, b), (1, 4 * Hn))
    hc = _recurrence(z, Wh, h, c, with_cell=True)
    return ops.index(hc, 0), ops.index(hc, 1)


class LSTMParams:
    """Names of the three tensors of one LSTM inside a ParamStore."""

    def __init__(self, store, prefix: str, d_in: int, d_h: int, rng):
        self.Wx = store.add(f"{prefix}.Wx", store.uniform(rng, (4 * d_h, d_in), 1.0 / np.sqrt(d_h)))
        self.Wh = store.add(f"{prefix}.Wh", store.uniform(rng, (4 * d_h, d_h), 1.0 / np.sqrt(d_h)))
        bias = np.zeros(4 * d_h)
        bias[d_h:2 * d_h] = 1.0  # forget gate starts open
        self.b = store.add(f"{prefix}.b", bias)
        self.d_h = d_h

    def run(self, X, reverse: bool = False, h0=None, c0=None) -> Tensor:
        return lstm_sequence(X, self.Wx, self.Wh, self.b, h0=h0, c0=c0, reverse=reverse)

    def step(self, x, state):
        return lstm_step(x, state, self.Wx, self.Wh, self.b)
