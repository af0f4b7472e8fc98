"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .params import ParamStore
from .tensor import Tensor, no_grad

STEP = 1e-5
# gradients smaller than this are compared on an absolute scale
FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: Optional[str]
    tolerance: float
    per_param: Dict[str, float] = field(default_factory=dict)
    coordinates: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def __str__(self):
        verdict = "ok" if self.passed else "FAIL"
        return (f"{verdict}: max rel error {self.max_rel_error:.2e} "
                f"({self.worst_param}) over {self.coordinates} coordinates")


def rel_error(a, n, floor: float = FLOOR):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def grad_check(loss_fn: Callable[[], Tensor], params: ParamStore, tolerance: float = 1e-4,
               samples: int = 64, step: float = STEP, seed: int = 0,
               floor: float = FLOOR) -> GradCheckReport:
    """Compare backprop gradients with central differences on sampled coordinates."""
    params.zero_grad()
    loss = loss_fn()
    loss.backward()
    rng = np.random.default_rng(seed)
    report = GradCheckReport(0.0, None, tolerance)
    for name, t in params.trainable():
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        flat = t.data.reshape(-1)
        n = flat.size
        picks = np.arange(n) if n <= samples else rng.choice(n, size=samples, replace=False)
        worst = 0.0
        for k in picks:
            orig = flat[k]
            with no_grad():
                flat[k] = orig + step
                up = float(loss_fn().data)
                flat[k] = orig - step
                down = float(loss_fn().data)
            flat[k] = orig
            numeric = (up - down) / (2 * step)
            err = float(rel_error(analytic.reshape(-1)[k], numeric, floor))
            worst = max(worst, err)
        report.per_param[name] = worst
        report.coordinates += len(picks)
        if worst >= report.max_rel_error:
            report.max_rel_error, report.worst_param = worst, name
    params.zero_grad()
    return report
