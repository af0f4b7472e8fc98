"""Exact-match scoring."""
from __future__ import annotations

from typing import Dict, Sequence

from ..sexpr import Leaf, Node, depth, render_sexpr


class LengthMismatch(ValueError):
    pass


def _is_form(x) -> bool:
    return isinstance(x, (Leaf, Node))


def exact_match(pred, gold) -> bool:
    """Canonical-render equality; failures (anything that is not a logical form) never match."""
    return _is_form(pred) and render_sexpr(pred) == render_sexpr(gold)


def accuracy(predictions: Sequence, golds: Sequence) -> float:
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(golds)} gold forms")
    if not golds:
        return 0.0
    return sum(exact_match(p, g) for p, g in zip(predictions, golds)) / len(golds)


def bucketed(predictions: Sequence, golds: Sequence, depths=(2, 3)) -> Dict[str, object]:
    """Overall accuracy plus one bucket per logical-form depth."""
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(golds)} gold forms")
    out: Dict[str, object] = {"full": accuracy(predictions, golds), "count": len(golds)}
    for d in depths:
        idx = [i for i, g in enumerate(golds) if depth(g) == d]
        out[f"d{d}"] = accuracy([predictions[i] for i in idx], [golds[i] for i in idx]) if idx else None
        out[f"count_d{d}"] = len(idx)
    return out
