"""Dense tensors with reverse-mode gradients."""
from __future__ import annotations

import contextlib
from typing import Callable, Optional, Sequence

import numpy as np

_state = {"grad": True, "dtype": np.float64}


class ShapeMismatch(ValueError):
    def __init__(self, op, *shapes):
        super().__init__(f"{op}: incompatible shapes " + " vs ".join(str(tuple(s)) for s in shapes))
        self.shapes = shapes


@contextlib.contextmanager
def no_grad():
    prev = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = prev


def grad_enabled() -> bool:
    return _state["grad"]


def default_dtype():
    return _state["dtype"]


@contextlib.contextmanager
def using_dtype(dtype):
    prev = _state["dtype"]
    _state["dtype"] = np.dtype(dtype).type
    try:
        yield
    finally:
        _state["dtype"] = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, np.ndarray) and data.dtype.kind == "f":
            self.data = data
        else:
            self.data = np.asarray(data, dtype=default_dtype())
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._prev: Sequence["Tensor"] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Propagate gradients from this tensor to every leaf that requires them."""
        if not self.requires_grad:
            raise RuntimeError("backward() on a tensor that does not require grad")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        seed = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=self.data.dtype)
        # interior nodes get fresh buffers; leaves accumulate
        grads = {id(self): seed}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.accumulate(g)
                continue
            node._backward(g, grads)

    # operator sugar
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, idx):
        from . import ops
        return ops.index(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _push(grads, t: Tensor, g):
    """Queue gradient ``g`` for ``t`` during a backward pass."""
    if not t.requires_grad:
        return
    key = id(t)
    cur = grads.get(key)
    if cur is None:
        grads[key] = g
    else:
        grads[key] = cur + g


def make(data, parents, backward) -> Tensor:
    """Wrap an op result; ``backward(g, push)`` receives the output grad and a push(tensor, grad) fn."""
    if _state["grad"] and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._prev = parents

        def run(g, grads):
            backward(g, lambda t, gt: _push(grads, t, gt))

        out._backward = run
        return out
    return Tensor(data)
