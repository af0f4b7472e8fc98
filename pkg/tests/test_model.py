import numpy as np
import pytest

from lookadapt.encoders import encode_utterance
from lookadapt.harness import sample
from lookadapt.model import (EmptyMemory, Greedy, Memory, ModelConfig, Oracle, ParseFailure, Parser, Policy,
                             RecursionLimitExceeded, adapt_keep_all)
from lookadapt.nncore import Tensor, no_grad
from lookadapt.scfg import sample_grammar, tokenize_utterance
from lookadapt.sexpr import parse_sexpr, render_sexpr


def small_parser(seed=1, **kw):
    return Parser(ModelConfig(hidden=6, f_hidden=10, seed=seed, **kw))


def entry(rule, text):
    g = sample_grammar()
    return rule, sample.gold_example(tokenize_utterance(text), g, g.by_id[rule].lhs)


def encoded(parser, words):
    return encode_utterance(parser.enc, words).matrix


class AlwaysReplace(Greedy):
    def decide(self, path, node, logit):
        return True


def test_lookup_single_entry():
    p = small_parser()
    mem = Memory([entry("g1", "Mary 's friends")])
    X = encoded(p, ("john", "'s", "parents"))
    idx, dist = p.lookup(mem, X, Tensor(np.ones(3)))
    assert idx == 0 and dist.tolist() == [1.0]


def test_lookup_empty_memory():
    p = small_parser()
    with pytest.raises(EmptyMemory):
        p.lookup(Memory([]), encoded(p, ("john",)), Tensor(np.ones(1)))
    with pytest.raises(EmptyMemory):
        p.parse(Memory([]), ("john",))


def test_lookup_distribution_property():
    rng = np.random.default_rng(0)
    mem = sample.sample_memory()
    words = ["john", "mary", "'s", "friends", "of", "parents", "zebra"]
    for seed in range(5):
        p = small_parser(seed)
        for _ in range(20):
            T = int(rng.integers(1, 6))
            X = encoded(p, [words[i] for i in rng.integers(0, len(words), T)])
            idx, dist = p.lookup(mem, X, Tensor(rng.uniform(0, 1, T)))
            assert (dist >= 0).all() and abs(dist.sum() - 1) < 1e-9
            assert idx == int(np.argmax(dist))


def test_pool_normalizes_large_attention():
    p = small_parser()
    X = Tensor(np.arange(6.0).reshape(3, 2))
    assert np.allclose(p.pool(X, Tensor(np.ones(3))).data, X.data.mean(axis=0))
    w = np.array([0.2, 0.3, 0.1])
    assert np.allclose(p.pool(X, Tensor(w)).data, w @ X.data)


def align_case(p, rng, T=4, S=3):
    D = p.dim
    X = Tensor(rng.normal(size=(T, D)))
    Ys = Tensor(rng.normal(size=(S, D)))
    yp = Tensor(rng.normal(size=D))
    return X, Ys, yp


def test_align_masks_unattended_words():
    p = small_parser()
    X, Ys, yp = align_case(p, np.random.default_rng(1))
    parent = np.array([1.0, 0.0, 0.5, 1.0])
    w = p.align(X, Ys, yp, Tensor(parent)).data
    assert w[1] == 0.0


def test_align_full_parent_is_identity():
    p = small_parser()
    X, Ys, yp = align_case(p, np.random.default_rng(2))
    base = p.align(X, Ys, yp, Tensor(np.ones(4))).data
    parent = np.array([0.25, 0.5, 0.9, 1.0])
    refined = p.align(X, Ys, yp, Tensor(parent)).data
    assert np.allclose(refined, base * np.sqrt(parent))


def test_align_bounds_property():
    rng = np.random.default_rng(3)
    p = small_parser()
    for i in range(1000):
        if i % 100 == 0:
            for name, t in p.store.items():
                if name.startswith(("align.",)):
                    t.data[...] = rng.normal(scale=2.0, size=t.data.shape)
        T, S = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        X, Ys, yp = align_case(p, rng, T, S)
        parent = rng.uniform(0, 1, T)
        w = p.align(X, Ys, yp, Tensor(parent)).data
        assert (w >= 0).all() and (w <= 1).all()
        assert (w <= np.sqrt(parent) + 1e-15).all()


def test_discriminate_range():
    rng = np.random.default_rng(4)
    p = small_parser()
    for _ in range(100):
        val = p.discriminate(Tensor(rng.normal(size=p.dim)), Tensor(rng.normal(size=(3, p.dim))))
        assert 0.0 < val < 1.0


def test_discriminate_zero_weights():
    p = small_parser()
    p.h_w.data[...] = 0.0
    p.h_b.data[...] = 0.0
    rng = np.random.default_rng(5)
    assert p.discriminate(Tensor(rng.normal(size=p.dim)), Tensor(rng.normal(size=(2, p.dim)))) == 0.5


def test_keep_everywhere_returns_retrieved_form():
    p = small_parser()
    mem = sample.sample_memory()
    words = tokenize_utterance("parents of Mary 's friends")
    with no_grad():
        X = encoded(p, words)
        idx, _ = p.lookup(mem, X, Tensor(np.ones(len(words))))
    assert adapt_keep_all(p, mem, words) == mem[idx].lf


def test_oracle_trace_parse():
    mem = sample.trace_memory()
    words = tokenize_utterance("John's Parents")
    g = sample_grammar()
    policy = Oracle.for_example(mem, sample.gold_example(words, g), g)
    trace = []
    out = small_parser().parse(mem, words, policy, trace)
    assert render_sexpr(out) == "(field parent john)"
    assert trace[0].event == "lookup" and trace[0].data["index"] == 0
    decisions = {tuple(e.path): e.data["action"] for e in trace if e.event == "decide"}
    assert decisions == {(0,): "replace", (1,): "replace"}


def test_memorized_utterance_keeps_everything():
    mem = sample.sample_memory()
    p = small_parser()
    for rule_id, e in mem.items():
        policy = Oracle(mem, e.logical_form)
        assert p.parse(mem, e.utterance, policy) == e.logical_form


def test_one_shot_exemplar():
    # the new exemplar is the only field-rooted entry; the rest are single words
    mem = Memory([entry("g8", "parents"), entry("g7", "friends"), entry("g4", "Mary")])
    mem = mem.extend([entry("g2", "friends of John")])
    gold = parse_sexpr("(field parent (field friend mary))")
    out = small_parser().parse(mem, tokenize_utterance("parents of Mary 's friends"), Oracle(mem, gold))
    assert out == gold


def test_recursion_limit():
    mem = Memory([entry("g1", "Mary 's friends")])
    p = small_parser()
    with pytest.raises(ParseFailure):
        p.parse(mem, ("john",), AlwaysReplace())
    with pytest.raises(RecursionLimitExceeded):
        p.run(mem, ("john",), AlwaysReplace())
    assert isinstance(p.predict(mem, ("john",), AlwaysReplace()), ParseFailure)


def test_root_never_adapted():
    class Spy(Policy):
        def __init__(self):
            self.paths = []

        def lookup(self, path, logits):
            return 0

        def decide(self, path, node, logit):
            self.paths.append(path)
            return False

    spy = Spy()
    small_parser().parse(Memory([entry("g1", "Mary 's friends")]), ("john",), spy)
    assert () not in spy.paths
    assert spy.paths == [(0,), (1,)]


def test_key_pooling():
    mem = sample.sample_memory()
    p = small_parser(key_pooling="mean")
    mem.encode(p)
    ent = mem[0]
    assert np.allclose(mem.keys.data[0], ent.X.matrix.data.mean(axis=0))
    q = small_parser(key_pooling="sum")
    mem.encode(q)
    assert np.allclose(mem.keys.data[0], mem[0].X.matrix.data.sum(axis=0))


def test_parse_deterministic():
    mem = sample.sample_memory()
    words = tokenize_utterance("friends of John")
    assert small_parser().parse(mem, words) == small_parser().parse(mem, words)


def test_save_load(tmp_path):
    p = small_parser(seed=7)
    path = tmp_path / "p.ckpt"
    p.save(path)
    q = Parser.load(path)
    assert q.cfg == p.cfg
    mem = sample.sample_memory()
    for text in ("friends of John", "Bob 's parents", "children of Mary 's friends"):
        words = tokenize_utterance(text)
        assert p.predict(mem, words) == q.predict(mem, words)
