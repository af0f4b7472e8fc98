"""Gold action sequences, the teacher-forced likelihood, and the training loops."""
from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .encoders import Encoders
from .model import (Action, Decide, Memory, MemoryRuleMissing, Oracle, Parser, Recorder,
                    ReplayMismatch, Retrieve, TeacherForcing, Traversal)
from .nncore import Adam, Tensor, ops
from .scfg import Example
from .sexpr import render_sexpr


@dataclass
class ActionSequence:
    actions: List[Action]

    def __len__(self):
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    @property
    def retrievals(self) -> int:
        return sum(isinstance(a, Retrieve) for a in self.actions)

    @property
    def decisions(self) -> int:
        return sum(isinstance(a, Decide) for a in self.actions)

    def to_list(self) -> List[dict]:
        out = []
        for a in self.actions:
            if isinstance(a, Retrieve):
                out.append({"retrieve": a.index, "path": list(a.path)})
            else:
                out.append({"decide": "replace" if a.replace else "keep", "path": list(a.path)})
        return out


@dataclass
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-3
    seed: int = 13
    batch_size: int = 1
    clip_norm: float = 5.0
    freeze_encoders: bool = False
    refresh_memory: bool = True   # re-encode memory keys at each epoch boundary
    dev_every: int = 0            # parse-accuracy check on dev data every k epochs (0: never)
    stop_at: Optional[float] = None  # stop once training/dev accuracy reaches this value
    select_best: bool = False     # restore the weights of the epoch with the best dev accuracy

    def __post_init__(self):
        if self.epochs < 0 or self.lr <= 0 or self.batch_size < 1 or self.clip_norm < 0:
            raise ValueError(f"invalid training configuration: {self}")


class TrainingError(RuntimeError):
    def __init__(self, example: Example, cause: Exception):
        super().__init__(f"{example}: {cause}")
        self.example = example
        self.cause = cause


def derive_gold_actions(example: Example, memory: Memory, grammars) -> ActionSequence:
    """The unique retrieve / keep / replace sequence that rebuilds ``example``'s logical form.

    Look-ups take the memory entry of the gold derivation's rule at that
    position; a subtree is kept when its head and arity agree with the gold
    node at the same path and replaced otherwise.
    """
    oracle = Oracle.for_example(memory, example, grammars, strict=True)
    rec = Recorder(oracle)
    out = Traversal(memory, rec).run(example.utterance)
    if out != example.logical_form:
        raise ReplayMismatch(f"replay gave {render_sexpr(out)} for {example}")
    return ActionSequence(rec.actions)


def sequence_nll(parser: Parser, example: Example, actions: Sequence[Action], memory: Memory,
                 refresh: bool = False) -> Tuple[Tensor, int]:
    """Teacher-forced negative log-likelihood of the actions; also returns how many the model gets right."""
    tf = TeacherForcing(list(actions))
    out = parser.run(memory, example.utterance, tf, fresh_y=True, refresh=refresh)
    if tf.pos != len(tf.actions):
        raise ReplayMismatch(f"{len(tf.actions) - tf.pos} actions left over for {example}")
    if out != example.logical_form:
        raise ReplayMismatch(f"teacher forcing produced {render_sexpr(out)} for {example}")
    return ops.sum(ops.stack(tf.terms)), tf.correct


def accuracy_of(parser: Parser, memory: Memory, examples: Sequence[Example]) -> float:
    if not examples:
        return 0.0
    hits = sum(parser.predict(memory, e.utterance) == e.logical_form for e in examples)
    return hits / len(examples)


def train(parser: Parser, examples: Sequence[Example], memory: Memory, grammars,
          cfg: Optional[TrainConfig] = None, dev: Optional[Tuple[Memory, Sequence[Example]]] = None,
          log: Optional[Callable[[dict], None]] = None) -> List[dict]:
    """Train on ``examples`` against ``memory``; returns one history record per epoch."""
    cfg = cfg or TrainConfig()
    examples = list(examples)
    if cfg.freeze_encoders:
        parser.store.freeze(Encoders.PREFIXES)
    gold = []
    for e in examples:
        try:
            gold.append(derive_gold_actions(e, memory, grammars))
        except (ReplayMismatch, MemoryRuleMissing) as exc:
            raise TrainingError(e, exc) from exc
    opt = Adam(lr=cfg.lr, clip_norm=cfg.clip_norm)
    rng = random.Random(cfg.seed)
    history = []
    best = _Best(parser.store, cfg.select_best)
    for epoch in range(1, cfg.epochs + 1):
        start = time.perf_counter()
        if cfg.refresh_memory or memory.keys is None:
            memory.encode(parser)
        order = list(range(len(examples)))
        rng.shuffle(order)
        total_loss = 0.0
        correct = n_actions = 0
        pending = 0
        for i in order:
            try:
                loss, hits = sequence_nll(parser, examples[i], gold[i], memory)
            except ReplayMismatch as exc:
                raise TrainingError(examples[i], exc) from exc
            loss.backward()
            total_loss += float(loss.data)
            correct += hits
            n_actions += len(gold[i])
            pending += 1
            if pending == cfg.batch_size:
                opt.step(parser.store)
                parser.touch()
                pending = 0
        if pending:
            opt.step(parser.store)
            parser.touch()
        rec = {"epoch": epoch,
               "mean_loss": total_loss / max(1, len(examples)),
               "action_accuracy": correct / max(1, n_actions)}
        if cfg.dev_every and epoch % cfg.dev_every == 0:
            dev_mem, dev_ex = dev if dev is not None else (memory, examples)
            rec["parse_accuracy"] = accuracy_of(parser, dev_mem, dev_ex)
            best.offer(epoch, rec["parse_accuracy"])
        rec["seconds"] = round(time.perf_counter() - start, 3)
        history.append(rec)
        if log is not None:
            log(rec)
        if cfg.stop_at is not None and rec.get("parse_accuracy", -1.0) >= cfg.stop_at:
            break
    best.restore(history)
    parser.touch()
    return history


class _Best:
    """Keeps a copy of the weights from the epoch with the highest dev accuracy."""

    def __init__(self, store, enabled: bool):
        self.store = store
        self.enabled = enabled
        self.epoch = None
        self.score = -1.0
        self.state = None

    def offer(self, epoch: int, score: float):
        if self.enabled and score > self.score:
            self.epoch, self.score = epoch, score
            self.state = self.store.state()

    def restore(self, history: List[dict]):
        if self.state is None:
            return
        self.store.load_state(self.state)
        if history:
            history[-1]["selected_epoch"] = self.epoch


def history_jsonl(history: Sequence[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in history)


def pretrain_encoders(parser: Parser, examples: Sequence[Example], memory: Memory, grammars,
                      cfg: Optional[TrainConfig] = None) -> Dict[str, np.ndarray]:
    """Train the full model on every domain; return only the encoder and embedding weights."""
    train(parser, examples, memory, grammars, cfg)
    return parser.store.state(parser.encoder_names())


def load_encoders(parser: Parser, snapshot: Dict[str, np.ndarray], freeze: bool = True):
    parser.store.load_state(snapshot)
    if freeze:
        parser.store.freeze(Encoders.PREFIXES)
    parser.touch()
