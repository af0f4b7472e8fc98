"""Hot kernels: the LSTM recurrence and the Adam update.

The compiled extension is used when it imports and the arrays are float64;
otherwise the numpy implementation below runs.  Set LOOKADAPT_PURE_PYTHON=1
to force the numpy path.

Gate layout in the pre-activation rows is [input, forget, candidate, output].
``Zx`` holds the input contribution ``X Wx^T + b`` for every step, so the
kernels only see the recurrent matrix ``Wh``.
"""
from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("LOOKADAPT_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _kernels as _ext
except ImportError:
    _ext = None

BACKEND = "cython" if _ext is not None else "numpy"


def _sig(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def forward_numpy(Zx, Wh, h0, c0):
    T, H4 = Zx.shape
    Hn = H4 // 4
    H = np.empty((T, Hn), dtype=Zx.dtype)
    C = np.empty((T, Hn), dtype=Zx.dtype)
    G = np.empty((T, H4), dtype=Zx.dtype)
    h, c = h0, c0
    for t in range(T):
        z = Zx[t] + Wh @ h
        i = _sig(z[:Hn])
        f = _sig(z[Hn:2 * Hn])
        g = np.tanh(z[2 * Hn:3 * Hn])
        o = _sig(z[3 * Hn:])
        c = f * c + i * g
        h = o * np.tanh(c)
        G[t, :Hn], G[t, Hn:2 * Hn], G[t, 2 * Hn:3 * Hn], G[t, 3 * Hn:] = i, f, g, o
        H[t], C[t] = h, c
    return H, C, G


def backward_numpy(dH, dC_last, Wh, C, G, c0):
    """Returns (dZ, dh0, dc0); ``dC_last`` is the gradient flowing into the final cell."""
    T, Hn = dH.shape
    dZ = np.empty((T, 4 * Hn), dtype=dH.dtype)
    dh_next = np.zeros(Hn, dtype=dH.dtype)
    dc_next = np.array(dC_last, dtype=dH.dtype, copy=True)
    for t in range(T - 1, -1, -1):
        i, f, g, o = G[t, :Hn], G[t, Hn:2 * Hn], G[t, 2 * Hn:3 * Hn], G[t, 3 * Hn:]
        c_prev = C[t - 1] if t > 0 else c0
        tc = np.tanh(C[t])
        dh = dH[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dZ[t, :Hn] = dc * g * i * (1.0 - i)
        dZ[t, Hn:2 * Hn] = dc * c_prev * f * (1.0 - f)
        dZ[t, 2 * Hn:3 * Hn] = dc * i * (1.0 - g * g)
        dZ[t, 3 * Hn:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = Wh.T @ dZ[t]
    return dZ, dh_next, dc_next


def _use_ext(*arrays):
    return _ext is not None and all(a.dtype == np.float64 for a in arrays)


def lstm_forward(Zx, Wh, h0, c0):
    if _use_ext(Zx, Wh, h0, c0):
        return _ext.lstm_forward(np.ascontiguousarray(Zx), np.ascontiguousarray(Wh),
                                 np.ascontiguousarray(h0), np.ascontiguousarray(c0))
    return forward_numpy(Zx, Wh, h0, c0)


def lstm_backward(dH, dC_last, Wh, C, G, c0):
    if _use_ext(dH, Wh, C, G, c0):
        return _ext.lstm_backward(np.ascontiguousarray(dH),
                                  np.ascontiguousarray(dC_last, dtype=np.float64),
                                  np.ascontiguousarray(Wh), np.ascontiguousarray(C),
                                  np.ascontiguousarray(G), np.ascontiguousarray(c0))
    return backward_numpy(dH, dC_last, Wh, C, G, c0)


def adam_numpy(w, g, m, v, scale, lr, b1, b2, corr1, corr2, eps):
    gs = g * scale if scale != 1.0 else g
    m *= b1
    m += (1.0 - b1) * gs
    v *= b2
    v += (1.0 - b2) * (gs * gs)
    denom = np.sqrt(v / corr2)
    denom += eps
    upd = m * (lr / corr1)
    upd /= denom
    w -= upd


def adam_update(w, g, m, v, scale, lr, b1, b2, corr1, corr2, eps):
    """In-place Adam step on same-shaped arrays ``w`` (weights), ``m`` and ``v`` (moments)."""
    if _use_ext(w, g, m, v) and w.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous:
        _ext.adam_update(w.reshape(-1), np.ascontiguousarray(g).reshape(-1), m.reshape(-1), v.reshape(-1),
                         scale, lr, b1, b2, corr1, corr2, eps)
    else:
        adam_numpy(w, g, m, v, scale, lr, b1, b2, corr1, corr2, eps)
