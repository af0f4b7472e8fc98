"""Named parameter storage."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from .tensor import Tensor, default_dtype


@dataclass
class ParamInfo:
    init: str
    trainable: bool = True


class ParamStore:
    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self._info: Dict[str, ParamInfo] = {}

    # -- construction -----------------------------------------------------------
    def add(self, name: str, value, trainable: bool = True, init: str = "given") -> Tensor:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already exists")
        t = Tensor(np.array(value, dtype=default_dtype()), requires_grad=trainable, name=name)
        self._params[name] = t
        self._info[name] = ParamInfo(init, trainable)
        return t

    @staticmethod
    def uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
        return rng.uniform(-bound, bound, size=shape)

    # -- access -------------------------------------------------------------------
    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self) -> Iterable[Tuple[str, Tensor]]:
        return self._params.items()

    def names(self, prefix: Optional[str] = None) -> List[str]:
        return [n for n in self._params if prefix is None or n.startswith(prefix)]

    def info(self, name: str) -> ParamInfo:
        return self._info[name]

    def trainable(self) -> List[Tuple[str, Tensor]]:
        return [(n, t) for n, t in self._params.items() if self._info[n].trainable]

    def size(self) -> int:
        return sum(t.data.size for t in self._params.values())

    # -- state ----------------------------------------------------------------------
    def set_trainable(self, name: str, flag: bool):
        self._info[name].trainable = flag
        self._params[name].requires_grad = flag
        if not flag:
            self._params[name].grad = None

    def freeze(self, prefixes: Iterable[str]):
        prefixes = tuple(prefixes)
        for n in self._params:
            if n.startswith(prefixes):
                self.set_trainable(n, False)

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def state(self, names: Optional[Iterable[str]] = None) -> Dict[str, np.ndarray]:
        names = list(self._params) if names is None else list(names)
        return {n: self._params[n].data.copy() for n in names}

    def load_state(self, state: Dict[str, np.ndarray], strict: bool = True):
        for n, value in state.items():
            if n not in self._params:
                if strict:
                    raise KeyError(f"unknown parameter {n!r}")
                continue
            cur = self._params[n]
            if cur.data.shape != value.shape:
                raise ValueError(f"{n}: shape {value.shape} does not match {cur.data.shape}")
            cur.data = np.array(value, dtype=cur.data.dtype)

    def astype(self, dtype):
        for t in self._params.values():
            t.data = t.data.astype(dtype)
