"""Word vectors and the two bidirectional LSTM encoders.

Encoded sequences are stored row-wise: row ``i`` of ``EncodedSequence.matrix``
is the column X_i, i.e. ``[h_fwd_i ; h_bck_i]`` where ``h_bck_i`` is the
backward LSTM state after reading tokens T..i.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .nncore import LSTMParams, ParamStore, Tensor, ops
from .sexpr import LPAREN, RPAREN, LogicalForm, tokenize_lf


class DimensionMismatch(ValueError):
    pass


class FileUnreadable(OSError):
    pass


class EmptyInput(ValueError):
    pass


def default_vectors_path() -> str:
    return str(resources.files("lookadapt").joinpath("data", "vectors50.txt"))


def oov_vector(word: str, dim: int) -> np.ndarray:
    """Deterministic stand-in for a word missing from the table."""
    seed = int.from_bytes(hashlib.sha256(("oov:" + word).encode()).digest()[:8], "little")
    return np.random.default_rng(seed).normal(0.0, 1.0 / np.sqrt(dim), dim)


class EmbeddingTable:
    def __init__(self, words: Sequence[str], vectors: np.ndarray, malformed: int = 0):
        self.vocab: Dict[str, int] = {w: i for i, w in enumerate(words)}
        self.words = list(words)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.dim = self.vectors.shape[1]
        self.malformed = malformed
        self.oov_policy = "sha256-seeded normal(0, 1/sqrt(dim))"
        self._oov: Dict[str, np.ndarray] = {}

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.vocab

    def lookup(self, word: str) -> np.ndarray:
        i = self.vocab.get(word)
        if i is not None:
            return self.vectors[i]
        if word not in self._oov:
            parts = [p for p in word.split("_") if p]
            if len(parts) > 1:
                # multi-word predicate: average of its parts
                self._oov[word] = np.mean([self.lookup(p) for p in parts], axis=0)
            else:
                self._oov[word] = oov_vector(word, self.dim)
        return self._oov[word]


def load_word_vectors(path: Optional[str] = None, dim: Optional[int] = None) -> EmbeddingTable:
    """Read ``word v1 ... v_dim`` lines; malformed lines are counted and skipped."""
    path = path or default_vectors_path()
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read word vectors from {path}: {exc}") from None
    words: List[str] = []
    rows: List[List[float]] = []
    bad = 0
    seen = set()
    for line in lines:
        parts = line.split()
        if len(parts) < 2:
            bad += int(bool(parts))
            continue
        try:
            vals = [float(x) for x in parts[1:]]
        except ValueError:
            bad += 1
            continue
        if dim is None:
            dim = len(vals)
        if len(vals) != dim:
            if not rows:
                raise DimensionMismatch(f"{path}: vectors have {len(vals)} values, expected {dim}")
            bad += 1
            continue
        if parts[0] in seen:
            bad += 1
            continue
        seen.add(parts[0])
        words.append(parts[0])
        rows.append(vals)
    if not rows:
        raise DimensionMismatch(f"{path}: no vectors of dimension {dim}")
    return EmbeddingTable(words, np.array(rows), malformed=bad)


@dataclass
class EncodedSequence:
    tokens: Tuple[str, ...]
    matrix: Tensor  # (len(tokens), 2 * d_h)

    def __len__(self):
        return len(self.tokens)

    def column(self, i: int) -> Tensor:
        """X_i with 1-based ``i``."""
        return ops.index(self.matrix, i - 1)


class Embedder:
    """Turns tokens into input rows; owns the parameters for the word table and parentheses."""

    def __init__(self, table: EmbeddingTable, store: ParamStore, rng, trainable: bool = False):
        self.table = table
        self.store = store
        self.words = store.add("emb.words", table.vectors, trainable=trainable, init="file")
        bound = 1.0 / np.sqrt(table.dim)
        self.lparen = store.add("emb.lparen", store.uniform(rng, table.dim, bound), init="uniform")
        self.rparen = store.add("emb.rparen", store.uniform(rng, table.dim, bound), init="uniform")

    def embed(self, tokens: Sequence[str]) -> Tensor:
        V = len(self.table)
        extra: List[np.ndarray] = []
        extra_ix: Dict[str, int] = {}
        idx = []
        for tok in tokens:
            if tok == LPAREN:
                idx.append(V)
            elif tok == RPAREN:
                idx.append(V + 1)
            else:
                w = tok.lower()
                i = self.table.vocab.get(w)
                if i is None:
                    if w not in extra_ix:
                        extra_ix[w] = V + 2 + len(extra)
                        extra.append(self.table.lookup(w))
                    i = extra_ix[w]
                idx.append(i)
        parts = [self.words, ops.reshape(self.lparen, (1, -1)), ops.reshape(self.rparen, (1, -1))]
        if extra:
            parts.append(Tensor(np.array(extra)))
        return ops.rows(ops.concat(parts, axis=0), idx)


class BiEncoder:
    def __init__(self, store: ParamStore, prefix: str, d_in: int, d_h: int, rng):
        self.prefix = prefix
        self.fwd = LSTMParams(store, prefix + ".fwd", d_in, d_h, rng)
        self.bck = LSTMParams(store, prefix + ".bck", d_in, d_h, rng)
        self.d_h = d_h

    def run(self, inputs: Tensor) -> Tensor:
        return ops.concat([self.fwd.run(inputs), self.bck.run(inputs, reverse=True)], axis=1)


class Encoders:
    """The shared embedder plus separate utterance and logical-form BiLSTMs."""

    PREFIXES = ("emb.", "enc_utt.", "enc_lf.")

    def __init__(self, table: EmbeddingTable, store: ParamStore, d_h: int, rng,
                 train_embeddings: bool = False):
        self.embedder = Embedder(table, store, rng, trainable=train_embeddings)
        self.utt = BiEncoder(store, "enc_utt", table.dim, d_h, rng)
        self.lf = BiEncoder(store, "enc_lf", table.dim, d_h, rng)
        self.d_h = d_h

    @property
    def dim(self) -> int:
        return 2 * self.d_h


def encode_utterance(encoders: Encoders, words: Sequence[str]) -> EncodedSequence:
    if not words:
        raise EmptyInput("cannot encode an empty utterance")
    tokens = tuple(words)
    return EncodedSequence(tokens, encoders.utt.run(encoders.embedder.embed(tokens)))


def encode_logical_form(encoders: Encoders, lf: LogicalForm) -> EncodedSequence:
    tokens = tokenize_lf(lf).tokens
    return EncodedSequence(tokens, encoders.lf.run(encoders.embedder.embed(tokens)))
