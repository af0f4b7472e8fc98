"""Finite-difference checks for every primitive and the three training losses."""
from __future__ import annotations

from typing import Callable, List, Sequence, Tuple

import numpy as np

from ..baseline import Seq2Seq, Seq2SeqConfig, output_vocabulary
from ..model import ModelConfig, Parser, TeacherForcing
from ..nncore import GradCheckReport, ParamStore, grad_check, ops, using_dtype
from ..nncore.lstm import LSTMParams, lstm_sequence, lstm_step
from ..scfg import sample_grammar, tokenize_utterance
from ..training import derive_gold_actions
from . import sample


def _op_cases(rng) -> List[Tuple[str, ParamStore, Callable]]:
    """One scalar loss per primitive; inputs avoid the kinks of abs, relu, max and sqrt."""
    cases = []

    def case(name, shapes, fn, positive=False, spread=False):
        s = ParamStore()
        ts = []
        for i, shape in enumerate(shapes):
            v = rng.normal(size=shape)
            if positive:
                v = np.abs(v) + 0.5
            if spread:
                v = np.sign(v) * (np.abs(v) + 0.2)
            ts.append(s.add(f"{name}.{i}", v))
        # a fixed random projection makes every output coordinate matter
        first = fn(*ts)
        proj = rng.normal(size=first.shape)
        cases.append((name, s, lambda: ops.sum(fn(*ts) * proj)))

    case("add", [(3, 4), (4,)], ops.add)
    case("sub", [(3, 4), (3, 1)], ops.sub)
    case("mul", [(3, 4), (3, 4)], ops.mul)
    case("div", [(3, 4), (4,)], ops.div, positive=True)
    case("scale", [(5,)], lambda a: ops.scale(a, -1.7))
    case("abs", [(6,)], ops.absolute, spread=True)
    case("relu", [(6,)], ops.relu, spread=True)
    case("sigmoid", [(6,)], ops.sigmoid)
    case("tanh", [(6,)], ops.tanh)
    case("sqrt", [(6,)], ops.sqrt, positive=True)
    case("exp", [(6,)], ops.exp)
    case("log", [(6,)], ops.log, positive=True)
    case("softplus", [(6,)], ops.softplus)
    case("log_sigmoid", [(6,)], ops.log_sigmoid)
    case("sum", [(3, 4)], lambda a: ops.sum(a, axis=0))
    case("mean", [(3, 4)], lambda a: ops.mean(a, axis=1))
    case("max", [(4, 5)], lambda a: ops.max(a, axis=1))
    case("softmax", [(3, 5)], ops.softmax)
    case("log_softmax", [(3, 5)], ops.log_softmax)
    case("matmul", [(3, 4), (4, 2)], ops.matmul)
    case("matmul_vec", [(3, 4), (4,)], ops.matmul)
    case("transpose", [(3, 4)], ops.transpose)
    case("reshape", [(3, 4)], lambda a: ops.reshape(a, (2, 6)))
    case("broadcast_to", [(4,)], lambda a: ops.broadcast_to(a, (3, 4)))
    case("affine", [(3, 4), (2, 4), (2,)], ops.affine)
    case("bilinear", [(3, 4), (4, 4), (3, 4)], ops.bilinear)
    case("bilinear_vec", [(4,), (4, 4), (3, 4)], ops.bilinear)
    case("concat", [(2, 3), (4, 3)], lambda a, b: ops.concat([a, b], axis=0))
    case("stack", [(3,), (3,)], lambda a, b: ops.stack([a, b]))
    case("index", [(4, 3)], lambda a: ops.index(a, (slice(1, 3), 2)))
    case("rows", [(5, 3)], lambda a: ops.rows(a, [0, 3, 3]))

    s = ParamStore()
    X = s.add("X", rng.normal(size=(5, 3)))
    lp = LSTMParams(s, "l", 3, 4, rng)
    h0, c0 = s.add("h0", rng.normal(size=4)), s.add("c0", rng.normal(size=4))
    proj = rng.normal(size=(5, 4))
    cases.append(("lstm_sequence", s, lambda: ops.sum(
        lstm_sequence(X, lp.Wx, lp.Wh, lp.b, h0, c0, reverse=True) * proj)))
    p2 = rng.normal(size=4)
    cases.append(("lstm_step", s, lambda: ops.sum(
        ops.concat(list(lstm_step(ops.index(X, 1), (h0, c0), lp.Wx, lp.Wh, lp.b))) * np.tile(p2, 2))))
    return cases


def _toy_parser() -> Parser:
    return Parser(ModelConfig(hidden=4, f_hidden=6, seed=5))


def _parser_loss(kind: str, texts: Sequence[str]):
    parser = _toy_parser()
    memory = sample.sample_memory()
    memory.encode(parser)
    g = sample_grammar()
    examples = [sample.gold_example(tokenize_utterance(t), g) for t in texts]
    gold = [derive_gold_actions(e, memory, g) for e in examples]

    def loss():
        terms = []
        for e, acts in zip(examples, gold):
            tf = TeacherForcing(list(acts))
            parser.run(memory, e.utterance, tf, fresh_y=True, refresh=False)
            terms += [t for t, k in zip(tf.terms, tf.kinds) if k == kind]
        return ops.sum(ops.stack(terms))

    return parser.store, loss


def _seq2seq_loss():
    texts = ("friends of John", "Mary 's parents")
    g = sample_grammar()
    examples = [sample.gold_example(tokenize_utterance(t), g) for t in texts]
    model = Seq2Seq(output_vocabulary(examples), Seq2SeqConfig(hidden=3, seed=5))
    return model.store, lambda: ops.sum(ops.stack([model.loss(e) for e in examples]))


COMPOSITE = ("retrieval", "align+discriminate", "seq2seq")
# Composite losses sum many terms (values around 10-20), so rounding noise in
# the difference quotient is about eps*|L|/step, a few 1e-10.  Gradients below
# this floor are compared on an absolute scale.  (A larger step would cut the
# noise but lets perturbations cross ReLU kinks in the look-up scorer.)
COMPOSITE_FLOOR = 1e-5


def run_gradchecks(tolerance: float = 1e-4, samples: int = 64, seed: int = 0,
                   only: Sequence[str] = ()) -> List[Tuple[str, GradCheckReport]]:
    """Run every check in 64-bit precision; returns (name, report) pairs."""
    out = []
    with using_dtype(np.float64):
        rng = np.random.default_rng(seed)
        for name, store, fn in _op_cases(rng):
            if not only or name in only:
                out.append((name, grad_check(fn, store, tolerance, samples=samples, seed=seed)))
        texts = ("parents of Mary 's friends", "John 's children", "Bob")
        if not only or "retrieval" in only:
            store, fn = _parser_loss("retrieve", texts)
            out.append(("retrieval", grad_check(fn, store, tolerance, samples=samples, seed=seed, floor=COMPOSITE_FLOOR)))
        if not only or "align+discriminate" in only:
            store, fn = _parser_loss("decide", texts)
            out.append(("align+discriminate", grad_check(fn, store, tolerance, samples=samples, seed=seed, floor=COMPOSITE_FLOOR)))
        if not only or "seq2seq" in only:
            store, fn = _seq2seq_loss()
            out.append(("seq2seq", grad_check(fn, store, tolerance, samples=samples, seed=seed,
                                              floor=COMPOSITE_FLOOR)))
    return out
