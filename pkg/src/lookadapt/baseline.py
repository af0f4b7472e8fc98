"""Attention-based sequence-to-sequence baseline.

A bidirectional LSTM reads the utterance.  The decoder LSTM starts from a
learned projection of the encoder's final states and, at each step, reads the
previous token's embedding together with the previous context vector.
Attention is a softmax over dot products between the decoder state and the
projected encoder states; the output distribution scores each predicate
embedding against a projection of [hidden ; context].
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .encoders import BiEncoder, EmbeddingTable, Embedder, load_word_vectors
from .nncore import Adam, LSTMParams, ParamStore, Tensor, no_grad, ops
from .nncore.checkpoint import load_arrays, save_arrays
from .scfg import Example
from .sexpr import LogicalForm, MalformedExpression, parse_tokens, tokenize_lf
from .training import TrainConfig

START = "<s>"
END = "</s>"


class DecodeFailure(ValueError):
    """Greedy decoding emitted a token sequence that is not a logical form; scored as wrong."""

    def __init__(self, tokens, reason):
        super().__init__(f"{reason}: {' '.join(tokens)}")
        self.tokens = list(tokens)


@dataclass
class Seq2SeqConfig:
    hidden: int = 64
    seed: int = 13
    length_factor: int = 4
    vectors: Optional[str] = None


class Seq2Seq:
    def __init__(self, vocab: Sequence[str], cfg: Optional[Seq2SeqConfig] = None,
                 table: Optional[EmbeddingTable] = None):
        self.cfg = cfg or Seq2SeqConfig()
        self.table = table or load_word_vectors(self.cfg.vectors)
        self.vocab = [START, END] + [t for t in vocab if t not in (START, END)]
        self.index = {t: i for i, t in enumerate(self.vocab)}
        rng = np.random.default_rng(self.cfg.seed)
        s = self.store = ParamStore()
        d, H = self.table.dim, self.cfg.hidden
        D = 2 * H
        bound = 1.0 / np.sqrt(H)
        self.embedder = Embedder(self.table, s, rng)
        self.encoder = BiEncoder(s, "s2s.enc", d, H, rng)
        # predicate embeddings start from the word vectors of their names
        init = np.array([self.table.lookup(t) if t not in (START, END, "(", ")")
                         else s.uniform(rng, d, bound) for t in self.vocab])
        self.pred_emb = s.add("s2s.pred_emb", init, init="word vectors")
        self.decoder = LSTMParams(s, "s2s.dec", d + D, D, rng)
        self.W_init = s.add("s2s.init.W", s.uniform(rng, (D, D), bound), init="uniform")
        self.b_init = s.add("s2s.init.b", np.zeros(D), init="zeros")
        self.W_att = s.add("s2s.att.W", s.uniform(rng, (D, D), bound), init="uniform")
        self.W_out = s.add("s2s.out.W", s.uniform(rng, (d, 2 * D), bound), init="uniform")

    # -- pieces -------------------------------------------------------------------
    def encode(self, words: Sequence[str]):
        Hs = self.encoder.run(self.embedder.embed(words))
        T, D = Hs.shape
        H = D // 2
        last = ops.concat([ops.index(Hs, (T - 1, slice(0, H))), ops.index(Hs, (0, slice(H, D)))])
        h0 = ops.tanh(ops.affine(last, self.W_init, self.b_init))
        P = ops.matmul(Hs, ops.transpose(self.W_att))
        return P, h0

    def step(self, P: Tensor, prev: int, state, ctx: Tensor):
        x = ops.concat([ops.index(self.pred_emb, prev), ctx])
        h, c = self.decoder.step(x, state)
        alpha = ops.softmax(ops.matmul(P, h))
        ctx = ops.matmul(alpha, P)
        out = ops.matmul(self.W_out, ops.concat([h, ctx]))
        logits = ops.matmul(self.pred_emb, out)
        return logits, (h, c), ctx

    def target_ids(self, lf: LogicalForm) -> List[int]:
        ids = []
        for t in tokenize_lf(lf).tokens:
            if t not in self.index:
                raise KeyError(f"token {t!r} is not in the output vocabulary")
            ids.append(self.index[t])
        return ids + [self.index[END]]

    def loss(self, example: Example) -> Tensor:
        P, h = self.encode(example.utterance)
        D = h.shape[0]
        state = (h, Tensor(np.zeros(D)))
        ctx = Tensor(np.zeros(D))
        prev = self.index[START]
        terms = []
        for y in self.target_ids(example.logical_form):
            logits, state, ctx = self.step(P, prev, state, ctx)
            terms.append(-ops.pick(ops.log_softmax(logits), y))
            prev = y
        return ops.sum(ops.stack(terms))

    def distributions(self, words: Sequence[str], tokens: Sequence[str]) -> List[np.ndarray]:
        """Teacher-forced output distributions (one per target position, end marker included)."""
        with no_grad():
            P, h = self.encode(words)
            D = h.shape[0]
            state, ctx = (h, Tensor(np.zeros(D))), Tensor(np.zeros(D))
            prev = self.index[START]
            out = []
            for t in list(tokens) + [END]:
                logits, state, ctx = self.step(P, prev, state, ctx)
                out.append(ops.softmax(logits).data)
                prev = self.index[t]
        return out

    def decode_tokens(self, words: Sequence[str]) -> List[str]:
        cap = self.cfg.length_factor * len(words)
        with no_grad():
            P, h = self.encode(words)
            D = h.shape[0]
            state, ctx = (h, Tensor(np.zeros(D))), Tensor(np.zeros(D))
            prev = self.index[START]
            out = []
            for _ in range(cap):
                logits, state, ctx = self.step(P, prev, state, ctx)
                prev = int(np.argmax(logits.data))
                if prev == self.index[END]:
                    break
                out.append(self.vocab[prev])
        return out

    # -- persistence --------------------------------------------------------------------
    def save(self, path, extra_meta=None):
        meta = {"s2s.hidden": self.cfg.hidden, "s2s.seed": self.cfg.seed,
                "s2s.length_factor": self.cfg.length_factor, "s2s.vocab": " ".join(self.vocab[2:])}
        if self.cfg.vectors:
            meta["s2s.vectors"] = self.cfg.vectors
        meta.update(extra_meta or {})
        save_arrays(path, self.store.state(), meta)

    @classmethod
    def load(cls, path) -> "Seq2Seq":
        arrays, meta = load_arrays(path)
        cfg = Seq2SeqConfig(int(meta["s2s.hidden"]), int(meta["s2s.seed"]),
                            int(meta["s2s.length_factor"]), meta.get("s2s.vectors"))
        model = cls(meta["s2s.vocab"].split(), cfg)
        model.store.load_state(arrays)
        return model


def output_vocabulary(examples: Sequence[Example]) -> List[str]:
    seen: Dict[str, None] = {}
    for e in examples:
        for t in tokenize_lf(e.logical_form).tokens:
            seen.setdefault(t, None)
    return list(seen)


def seq2seq_train(examples: Sequence[Example], cfg: Optional[TrainConfig] = None,
                  model_cfg: Optional[Seq2SeqConfig] = None, table: Optional[EmbeddingTable] = None,
                  model: Optional[Seq2Seq] = None,
                  log: Optional[Callable[[dict], None]] = None,
                  dev: Optional[Sequence[Example]] = None) -> Seq2Seq:
    """Teacher-forced cross-entropy training, one optimizer step per example.

    With ``cfg.dev_every`` exact-match accuracy on ``dev`` (default: the
    training data) is recorded; ``cfg.select_best`` keeps the best epoch.
    """
    cfg = cfg or TrainConfig()
    examples = list(examples)
    if not examples and model is None:
        raise ValueError("seq2seq training needs at least one example")
    model = model or Seq2Seq(output_vocabulary(examples), model_cfg, table)
    opt = Adam(lr=cfg.lr, clip_norm=cfg.clip_norm)
    rng = random.Random(cfg.seed)
    model.history = []
    best_epoch, best_score, best_state = None, -1.0, None
    for epoch in range(1, cfg.epochs + 1):
        order = list(range(len(examples)))
        rng.shuffle(order)
        total = 0.0
        pending = 0
        for i in order:
            loss = model.loss(examples[i])
            loss.backward()
            total += float(loss.data)
            pending += 1
            if pending == cfg.batch_size:
                opt.step(model.store)
                pending = 0
        if pending:
            opt.step(model.store)
        rec = {"epoch": epoch, "mean_loss": total / len(examples)}
        if cfg.dev_every and epoch % cfg.dev_every == 0:
            rec["parse_accuracy"] = decode_accuracy(model, examples if dev is None else dev)
            if cfg.select_best and rec["parse_accuracy"] > best_score:
                best_epoch, best_score, best_state = epoch, rec["parse_accuracy"], model.store.state()
        model.history.append(rec)
        if log is not None:
            log(rec)
        if cfg.stop_at is not None and rec.get("parse_accuracy", -1.0) >= cfg.stop_at:
            break
    if best_state is not None:
        model.store.load_state(best_state)
        model.history[-1]["selected_epoch"] = best_epoch
    return model


def seq2seq_decode(model: Seq2Seq, words: Sequence[str]):
    """Greedy decode; returns a LogicalForm or a DecodeFailure value."""
    tokens = model.decode_tokens(words)
    try:
        return parse_tokens(tokens)
    except MalformedExpression as exc:
        return DecodeFailure(tokens, str(exc))


def decode_accuracy(model: Seq2Seq, examples: Sequence[Example]) -> float:
    """Exact-match accuracy of greedy decoding."""
    if not examples:
        return 0.0
    return sum(seq2seq_decode(model, e.utterance) == e.logical_form for e in examples) / len(examples)


def token_accuracy(model: Seq2Seq, examples: Sequence[Example]) -> float:
    """Fraction of target tokens (end marker included) predicted correctly under teacher forcing."""
    hits = total = 0
    for e in examples:
        toks = tokenize_lf(e.logical_form).tokens
        dists = model.distributions(e.utterance, toks)
        for d, t in zip(dists, list(toks) + [END]):
            hits += int(int(np.argmax(d)) == model.index[t])
            total += 1
    return hits / max(1, total)
