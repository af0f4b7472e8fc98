"""Adam with global-norm gradient clipping."""
from __future__ import annotations

from typing import Dict

import numpy as np

from .kernels import adam_update
from .params import ParamStore


class MissingGradient(RuntimeError):
    def __init__(self, name):
        super().__init__(f"parameter {name!r} has no gradient")
        self.name = name


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, clip_norm: float = 5.0):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, store: ParamStore, strict: bool = False) -> float:
        """Apply one update, then clear gradients.  Returns the pre-clip gradient norm.

        With ``strict`` a trainable parameter without a gradient raises
        MissingGradient; otherwise its gradient is taken as zero.
        """
        params = store.trainable()
        grads = {}
        for name, t in params:
            if t.grad is None:
                if strict:
                    raise MissingGradient(name)
                continue
            grads[name] = t.grad
        norm = float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values())))
        factor = 1.0
        if self.clip_norm and norm > self.clip_norm:
            factor = self.clip_norm / norm
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for name, t in params:
            g = grads.get(name)
            m = self.m.get(name)
            if g is None and m is None:
                continue  # never touched: nothing to update
            if g is None:
                g = np.zeros_like(t.data)
            if m is None:
                m = self.m[name] = np.zeros_like(t.data)
                self.v[name] = np.zeros_like(t.data)
            adam_update(t.data, g, m, self.v[name], factor, self.lr, b1, b2, corr1, corr2, self.eps)
        store.zero_grad()
        return norm


def optimizer_step(store: ParamStore, opt: Adam, strict: bool = True) -> Adam:
    opt.step(store, strict=strict)
    return opt
