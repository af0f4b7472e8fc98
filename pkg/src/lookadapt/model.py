"""The look-up-and-adapt parser.

Parsing retrieves the memory entry whose utterance best matches the attended
words, then walks the children of the retrieved logical form.  Each visited
subtree is aligned to the utterance, scored by the discriminator and either
kept (recursing into its children) or replaced by the result of a fresh
look-up focused on the subtree's attention.  The retrieved root itself is
never adapted.

Node positions in traces and action sequences are *output paths*: the path
of the node in the logical form being built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .encoders import (EmbeddingTable, EncodedSequence, Encoders, encode_logical_form,
                       encode_utterance, load_word_vectors)
from .nncore import ParamStore, Tensor, no_grad, ops
from .nncore.checkpoint import load_arrays, save_arrays
from .scfg import Example, derivation_paths
from .sexpr import Leaf, LogicalForm, Node, Path, TokenSpan, depth, render_sexpr, subtree, tokenize_lf


class EmptyMemory(ValueError):
    pass


class SpanEmpty(ValueError):
    pass


class RecursionLimitExceeded(RuntimeError):
    pass


class ParseFailure(RuntimeError):
    """Parsing did not produce a logical form; scored as an incorrect parse."""


class MemoryRuleMissing(KeyError):
    pass


class ReplayMismatch(RuntimeError):
    pass


# -- configuration --------------------------------------------------------------

@dataclass
class ModelConfig:
    hidden: int = 64
    f_hidden: int = 128
    key_pooling: str = "mean"   # memory keys: mean or sum of utterance rows
    span_pooling: str = "sum"   # discriminator subtree vector: sum or mean of span rows
    train_embeddings: bool = False
    seed: int = 13
    vectors: Optional[str] = None

    def to_meta(self) -> Dict[str, object]:
        return {f"model.{k}": v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_meta(cls, meta: Dict[str, str]) -> "ModelConfig":
        cfg = cls()
        for k, v in meta.items():
            if not k.startswith("model."):
                continue
            name = k[len("model."):]
            if not hasattr(cfg, name):
                continue
            cur = getattr(cfg, name)
            if isinstance(cur, bool):
                v = v in ("1", "true", "True")
            elif isinstance(cur, int):
                v = int(v)
            setattr(cfg, name, v)
        return cfg


# -- memory -----------------------------------------------------------------------

@dataclass
class MemoryEntry:
    rule_id: str
    example: Example
    spans: TokenSpan
    X: Optional[EncodedSequence] = None
    Y: Optional[EncodedSequence] = None

    @property
    def lf(self) -> LogicalForm:
        return self.example.logical_form


class Memory:
    """Ordered exemplars with cached encodings (keys are treated as constants)."""

    def __init__(self, items: Sequence[Tuple[str, Example]]):
        self.entries: List[MemoryEntry] = [MemoryEntry(rid, e, tokenize_lf(e.logical_form))
                                           for rid, e in items]
        # rule ids repeat across domains, so entries are keyed by (domain, rule id)
        self.by_rule: Dict[Tuple[str, str], int] = {}
        for i, ent in enumerate(self.entries):
            self.by_rule.setdefault((ent.example.domain, ent.rule_id), i)
        self.keys: Optional[Tensor] = None
        self.stamp = None

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i) -> MemoryEntry:
        return self.entries[i]

    @property
    def max_depth(self) -> int:
        return max((depth(e.lf) for e in self.entries), default=0)

    @property
    def recursion_cap(self) -> int:
        return 3 * self.max_depth

    def index_of(self, domain: str, rule_id: str) -> int:
        try:
            return self.by_rule[(domain, rule_id)]
        except KeyError:
            raise MemoryRuleMissing(f"no memory entry for rule {rule_id!r} of {domain!r}") from None

    def items(self) -> List[Tuple[str, Example]]:
        return [(e.rule_id, e.example) for e in self.entries]

    def extend(self, items: Sequence[Tuple[str, Example]]) -> "Memory":
        return Memory(self.items() + list(items))

    def encode(self, parser: "Parser"):
        """Recompute every cached encoding with the parser's current weights."""
        with no_grad():
            keys = []
            for ent in self.entries:
                ent.X = encode_utterance(parser.enc, ent.example.utterance)
                ent.Y = encode_logical_form(parser.enc, ent.lf)
                rows = ent.X.matrix.data
                keys.append(rows.mean(axis=0) if parser.cfg.key_pooling == "mean" else rows.sum(axis=0))
            self.keys = Tensor(np.array(keys))
        self.stamp = parser.stamp


# -- actions and policies -----------------------------------------------------------

@dataclass(frozen=True)
class Retrieve:
    path: Path
    index: int


@dataclass(frozen=True)
class Decide:
    path: Path
    replace: bool


Action = Union[Retrieve, Decide]


class Policy:
    """Chooses look-up targets and keep/replace actions during a traversal."""
    structural = False  # True when no neural score is needed

    def lookup(self, path: Path, logits: Optional[Tensor]) -> int:
        raise NotImplementedError

    def decide(self, path: Path, node: LogicalForm, logit: Optional[Tensor]) -> bool:
        raise NotImplementedError


class Greedy(Policy):
    def lookup(self, path, logits):
        return int(np.argmax(logits.data))

    def decide(self, path, node, logit):
        return float(logit.data) > 0.0  # sigmoid(d) > 0.5


class Oracle(Policy):
    """Decisions from a gold logical form (and optionally its derivation).

    Keep iff the gold tree has a node at the same path with the same head and
    arity.  Look-ups take the memory entry of the gold derivation's rule at the
    path, then one with the identical logical form, then one with the same head
    and arity.
    """

    def __init__(self, memory: Memory, gold: LogicalForm, rules: Optional[Dict[Path, Tuple[str, str]]] = None,
                 lookup: bool = True, discrim: bool = True, strict: bool = False):
        self.memory = memory
        self.gold = gold
        self.rules = rules or {}  # output path -> (domain, rule id) of the gold derivation
        self.oracle_lookup = lookup
        self.oracle_discrim = discrim
        self.strict = strict
        self.structural = lookup and discrim
        self._greedy = Greedy()

    @classmethod
    def for_example(cls, memory: Memory, example: Example, grammars, **kw) -> "Oracle":
        """Oracle for a generated example; ``grammars`` is a Grammar or a domain -> Grammar map."""
        g = grammars.get(example.domain) if isinstance(grammars, dict) else grammars
        rules = {}
        if g is not None:
            rules = {p: (example.domain, d.rule)
                     for p, d in derivation_paths(g, example.derivation).items()}
        return cls(memory, example.logical_form, rules, **kw)

    def _gold_at(self, path):
        try:
            return subtree(self.gold, path)
        except KeyError:
            return None

    def lookup(self, path, logits):
        if not self.oracle_lookup:
            return self._greedy.lookup(path, logits)
        rule = self.rules.get(path)
        if rule is not None:
            return self.memory.index_of(*rule)
        if self.strict:
            raise ReplayMismatch(f"look-up at {path} is not at a derivation node")
        target = self._gold_at(path)
        if target is not None:
            for i, ent in enumerate(self.memory.entries):
                if ent.lf == target:
                    return i
            for i, ent in enumerate(self.memory.entries):
                if ent.lf.head == target.head and len(ent.lf.children) == len(target.children):
                    return i
        if logits is None:
            raise ReplayMismatch(f"no memory entry fits the gold subtree at {path}")
        return self._greedy.lookup(path, logits)

    def decide(self, path, node, logit):
        if not self.oracle_discrim:
            return self._greedy.decide(path, node, logit)
        target = self._gold_at(path)
        if target is None:
            return False
        return not (target.head == node.head and len(target.children) == len(node.children))


class Recorder(Policy):
    """Wraps a policy and records the actions it takes."""

    def __init__(self, inner: Policy):
        self.inner = inner
        self.structural = inner.structural
        self.actions: List[Action] = []

    def lookup(self, path, logits):
        i = self.inner.lookup(path, logits)
        self.actions.append(Retrieve(path, i))
        return i

    def decide(self, path, node, logit):
        r = self.inner.decide(path, node, logit)
        self.actions.append(Decide(path, r))
        return r


class TeacherForcing(Policy):
    """Follows a gold action sequence and collects the negative log-likelihood terms."""

    def __init__(self, actions: Sequence[Action]):
        self.actions = list(actions)
        self.pos = 0
        self.terms: List[Tensor] = []
        self.kinds: List[str] = []  # "retrieve" or "decide", parallel to terms
        self.correct = 0

    def _next(self, kind, path):
        if self.pos >= len(self.actions):
            raise ReplayMismatch(f"action sequence exhausted at {path}")
        a = self.actions[self.pos]
        self.pos += 1
        if not isinstance(a, kind) or a.path != path:
            raise ReplayMismatch(f"expected {kind.__name__} at {path}, found {a}")
        return a

    def lookup(self, path, logits):
        a = self._next(Retrieve, path)
        self.terms.append(-ops.pick(ops.log_softmax(logits), a.index))
        self.kinds.append("retrieve")
        self.correct += int(np.argmax(logits.data) == a.index)
        return a.index

    def decide(self, path, node, logit):
        a = self._next(Decide, path)
        # -log sigmoid(d) for replace, -log(1 - sigmoid(d)) for keep
        self.terms.append(ops.softplus(-logit if a.replace else logit))
        self.kinds.append("decide")
        self.correct += int((float(logit.data) > 0.0) == a.replace)
        return a.replace


# -- the parser ------------------------------------------------------------------------

@dataclass
class TraceEvent:
    event: str
    path: Path
    data: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return dict({"event": self.event, "path": list(self.path)}, **self.data)


class Parser:
    def __init__(self, cfg: Optional[ModelConfig] = None, table: Optional[EmbeddingTable] = None):
        self.cfg = cfg or ModelConfig()
        self.table = table or load_word_vectors(self.cfg.vectors)
        self.store = ParamStore()
        self.stamp = 0
        rng = np.random.default_rng(self.cfg.seed)
        self.enc = Encoders(self.table, self.store, self.cfg.hidden, rng, self.cfg.train_embeddings)
        D = self.enc.dim
        F = self.cfg.f_hidden
        bound = 1.0 / np.sqrt(self.cfg.hidden)
        s = self.store
        small = lambda shape: s.uniform(rng, shape, 0.01)
        dense = lambda shape: s.uniform(rng, shape, bound)
        self.W1 = s.add("look.W1", small((D, D)), init="uniform(0.01)")
        self.f_W1 = s.add("look.f.W1", dense((F, 4 * D + 1)), init="uniform")
        self.f_b1 = s.add("look.f.b1", np.zeros(F), init="zeros")
        self.f_W2 = s.add("look.f.W2", dense((1, F)), init="uniform")
        self.f_b2 = s.add("look.f.b2", np.zeros(1), init="zeros")
        self.W2 = s.add("align.W2", small((D, D)), init="uniform(0.01)")
        self.Wp = s.add("align.Wp", small((D, D)), init="uniform(0.01)")
        self.g_w = s.add("align.g.w", dense(7 * D + 2), init="uniform")
        self.g_b = s.add("align.g.b", np.zeros(1), init="zeros")
        self.root = s.add("align.root", dense(D), init="uniform")
        self.W3 = s.add("disc.W3", small((D, D)), init="uniform(0.01)")
        self.h_w = s.add("disc.h.w", dense(4 * D + 1), init="uniform")
        self.h_b = s.add("disc.h.b", np.zeros(1), init="zeros")

    @property
    def dim(self) -> int:
        return self.enc.dim

    def touch(self):
        """Mark parameters as changed so cached memory encodings get refreshed."""
        self.stamp += 1

    def encoder_names(self) -> List[str]:
        return [n for n in self.store if n.startswith(Encoders.PREFIXES)]

    # -- components ------------------------------------------------------------
    def pool(self, X: Tensor, w: Tensor) -> Tensor:
        """x' = X w, divided by sum(w) when that exceeds 1."""
        x = ops.matmul(w, X)
        total = ops.sum(w)
        if float(total.data) > 1.0:
            x = ops.div(x, total)
        return x

    def retrieval_logits(self, keys: Tensor, q: Tensor) -> Tensor:
        n, D = keys.shape
        Q = ops.broadcast_to(q, (n, D))
        bil = ops.reshape(ops.bilinear(q, self.W1, keys), (n, 1))
        feats = ops.concat([Q, keys, Q * keys, ops.absolute(Q - keys), bil], axis=1)
        hid = ops.relu(ops.affine(feats, self.f_W1, self.f_b1))
        return ops.reshape(ops.affine(hid, self.f_W2, self.f_b2), (n,))

    def lookup(self, memory: Memory, X: Tensor, w: Tensor) -> Tuple[int, np.ndarray]:
        if not len(memory):
            raise EmptyMemory("memory has no entries")
        self._ensure_encoded(memory)
        logits = self.retrieval_logits(memory.keys, self.pool(X, w))
        dist = ops.softmax(logits).data
        return int(np.argmax(logits.data)), dist

    def align(self, X: Tensor, Ys: Tensor, yp: Tensor, w_parent: Tensor) -> Tensor:
        """Per-word attention of a subtree whose span rows are ``Ys`` under parent row ``yp``."""
        T, D = X.shape
        S = Ys.shape[0]
        if S == 0:
            raise SpanEmpty("subtree span is empty")
        part = lambda k: ops.index(self.g_w, slice(k * D, (k + 1) * D))
        a, b, c, dd, e, f, g = (part(k) for k in range(7))
        alpha = ops.index(self.g_w, 7 * D)
        beta = ops.index(self.g_w, 7 * D + 1)
        per_word = (ops.matmul(X, a) + ops.matmul(X, e * yp)
                    + ops.matmul(ops.absolute(X - yp), g)
                    + ops.bilinear(X, self.Wp, yp) * beta
                    + ops.sum(yp * c) + self.g_b)
        per_pred = ops.matmul(Ys, b)
        diff = ops.absolute(ops.reshape(X, (T, 1, D)) - ops.reshape(Ys, (1, S, D)))
        pair = (ops.matmul(X * dd, ops.transpose(Ys))
                + ops.reshape(ops.matmul(ops.reshape(diff, (T * S, D)), f), (T, S))
                + ops.bilinear(X, self.W2, Ys) * alpha)
        s = pair + ops.reshape(per_word, (T, 1)) + ops.reshape(per_pred, (1, S))
        w = ops.max(ops.sigmoid(s), axis=1)
        return w * ops.sqrt(w_parent)

    def align_subtree(self, X: Tensor, Y: Tensor, spans: TokenSpan, path: Path, w_parent: Tensor,
                      parent_path: Optional[Path] = None) -> Tensor:
        """Attention for the subtree at ``path``; without a parent the root sentinel stands in."""
        first, last = spans.node_spans[path]
        Ys = ops.index(Y, slice(first - 1, last))
        yp = self.root if parent_path is None else ops.index(Y, spans.head_index(parent_path) - 1)
        return self.align(X, Ys, yp, w_parent)

    def discriminate_logit(self, xq: Tensor, Ys: Tensor) -> Tensor:
        if Ys.shape[0] == 0:
            raise SpanEmpty("subtree span is empty")
        y = ops.sum(Ys, axis=0) if self.cfg.span_pooling == "sum" else ops.mean(Ys, axis=0)
        bil = ops.reshape(ops.bilinear(xq, self.W3, y), (1,))
        feats = ops.concat([xq, y, xq * y, ops.absolute(xq - y), bil])
        return ops.sum(self.h_w * feats) + ops.index(self.h_b, 0)

    def discriminate(self, xq: Tensor, Ys: Tensor) -> float:
        return float(ops.sigmoid(self.discriminate_logit(xq, Ys)).data)

    # -- traversal -----------------------------------------------------------------
    def _ensure_encoded(self, memory: Memory):
        if memory.keys is None or memory.stamp != self.stamp:
            memory.encode(self)

    def run(self, memory: Memory, words: Sequence[str], policy: Policy,
            trace: Optional[List[TraceEvent]] = None, fresh_y: bool = False,
            refresh: bool = True) -> LogicalForm:
        """Look up and adapt for one utterance under ``policy``.

        ``fresh_y`` re-encodes retrieved logical forms with gradients (training);
        with ``refresh`` stale memory encodings are recomputed first.
        """
        if refresh:
            self._ensure_encoded(memory)
        elif memory.keys is None:
            memory.encode(self)
        return Traversal(memory, policy, self, trace, fresh_y).run(words)

    # -- public entry points ------------------------------------------------------------
    def parse(self, memory: Memory, words: Sequence[str], policy: Optional[Policy] = None,
              trace: Optional[List[TraceEvent]] = None) -> LogicalForm:
        """Greedy parse by default; pass an Oracle (or any Policy) to override decisions."""
        policy = policy or Greedy()
        with no_grad():
            try:
                out = self.run(memory, words, policy, trace)
            except RecursionLimitExceeded as exc:
                raise ParseFailure(str(exc)) from exc
        if trace is not None:
            trace.append(TraceEvent("output", (), {"logical_form": render_sexpr(out)}))
        return out

    def predict(self, memory: Memory, words: Sequence[str], policy: Optional[Policy] = None):
        """Like parse, but returns a ParseFailure value instead of raising."""
        try:
            return self.parse(memory, words, policy)
        except ParseFailure as exc:
            return exc

    # -- persistence -------------------------------------------------------------------
    def save(self, path, extra_meta: Optional[Dict[str, object]] = None):
        meta = self.cfg.to_meta()
        meta.update(extra_meta or {})
        save_arrays(path, self.store.state(), meta)

    @classmethod
    def load(cls, path) -> "Parser":
        arrays, meta = load_arrays(path)
        parser = cls(ModelConfig.from_meta(meta))
        parser.store.load_state(arrays)
        parser.touch()
        return parser


class Traversal:
    """One run of the look-up / adapt recursion.

    Without a parser (or with a structural policy and no trace) only the tree
    bookkeeping runs, which is how gold action sequences are derived.
    """

    def __init__(self, memory: Memory, policy: Policy, parser: Optional[Parser] = None,
                 trace: Optional[List[TraceEvent]] = None, fresh_y: bool = False):
        if not len(memory):
            raise EmptyMemory("memory has no entries")
        self.memory = memory
        self.policy = policy
        self.parser = parser
        self.trace = trace
        self.fresh_y = fresh_y
        self.cap = memory.recursion_cap
        self.neural = parser is not None and (not policy.structural or trace is not None)
        self.X: Optional[Tensor] = None
        self.y_cache: Dict[int, Tensor] = {}

    def run(self, words: Sequence[str]) -> LogicalForm:
        w0 = None
        if self.neural:
            self.X = encode_utterance(self.parser.enc, words).matrix
            w0 = Tensor(np.ones(len(words), dtype=self.X.data.dtype))
        return self._look(w0, ())

    def _entry_y(self, idx) -> Tensor:
        ent = self.memory.entries[idx]
        if self.fresh_y:
            if idx not in self.y_cache:
                self.y_cache[idx] = encode_logical_form(self.parser.enc, ent.lf).matrix
            return self.y_cache[idx]
        return ent.Y.matrix

    def _look(self, w, out_path):
        if len(out_path) > self.cap:
            raise RecursionLimitExceeded(f"adaptation deeper than {self.cap} levels")
        p = self.parser
        logits = None
        if w is not None:
            logits = p.retrieval_logits(self.memory.keys, p.pool(self.X, w))
        idx = self.policy.lookup(out_path, logits)
        ent = self.memory.entries[idx]
        if self.trace is not None:
            data = {"index": idx, "rule": ent.rule_id, "utterance": ent.example.text,
                    "logical_form": render_sexpr(ent.lf)}
            if logits is not None:
                data["distribution"] = [round(float(v), 6) for v in ops.softmax(logits).data]
            self.trace.append(TraceEvent("lookup", out_path, data))
        T = ent.lf
        if isinstance(T, Leaf):
            return T
        Y = self._entry_y(idx) if w is not None else None
        kids = tuple(self._adapt(ent, Y, (i,), (), w, out_path + (i,))
                     for i in range(len(T.children)))
        return Node(T.head, kids)

    def _adapt(self, ent: MemoryEntry, Y, path, parent_path, w_parent, out_path):
        if len(out_path) > self.cap:
            raise RecursionLimitExceeded(f"adaptation deeper than {self.cap} levels")
        node = subtree(ent.lf, path)
        w = logit = None
        if w_parent is not None:
            p = self.parser
            first, last = ent.spans.node_spans[path]
            Ys = ops.index(Y, slice(first - 1, last))
            yp = ops.index(Y, ent.spans.head_index(parent_path) - 1)
            w = p.align(self.X, Ys, yp, w_parent)
            logit = p.discriminate_logit(p.pool(self.X, w), Ys)
        replace = self.policy.decide(out_path, node, logit)
        if self.trace is not None:
            data = {"node": render_sexpr(node), "action": "replace" if replace else "keep"}
            if logit is not None:
                data["p_fail"] = round(float(ops.sigmoid(logit).data), 6)
                data["attention"] = [round(float(v), 6) for v in w.data]
            self.trace.append(TraceEvent("decide", out_path, data))
        if replace:
            return self._look(w, out_path)
        if isinstance(node, Leaf):
            return node
        return Node(node.head, tuple(self._adapt(ent, Y, path + (i,), path, w, out_path + (i,))
                                     for i in range(len(node.children))))


def parse(parser: Parser, memory: Memory, words: Sequence[str], **kw) -> LogicalForm:
    return parser.parse(memory, words, **kw)


def adapt_keep_all(parser: Parser, memory: Memory, words: Sequence[str]) -> LogicalForm:
    """Parse with every adapt decision forced to Keep (greedy look-up at the root)."""

    class KeepAll(Greedy):
        def decide(self, path, node, logit):
            return False

    return parser.parse(memory, words, policy=KeepAll())
