import math

import numpy as np
import pytest

from lookadapt.encoders import Encoders
from lookadapt.harness import sample
from lookadapt.model import Decide, Memory, ModelConfig, Parser, Policy, Retrieve, TeacherForcing, Traversal
from lookadapt.nncore import Tensor, grad_check, ops, using_dtype
from lookadapt.scfg import DatasetConfig, build_dataset, load_builtin, sample_grammar, tokenize_utterance
from lookadapt.training import (TrainConfig, TrainingError, derive_gold_actions, load_encoders, pretrain_encoders,
                                sequence_nll, train)


def small_parser(seed=2):
    return Parser(ModelConfig(hidden=4, f_hidden=6, seed=seed))


def gold(text, g=None):
    return sample.gold_example(tokenize_utterance(text), g or sample_grammar())


class Replay(Policy):
    """Follows recorded actions without any model scores."""
    structural = True

    def __init__(self, actions):
        self.actions = iter(actions)

    def lookup(self, path, logits):
        a = next(self.actions)
        assert isinstance(a, Retrieve) and a.path == path
        return a.index

    def decide(self, path, node, logit):
        a = next(self.actions)
        assert isinstance(a, Decide) and a.path == path
        return a.replace


def replay(mem, e, acts):
    return Traversal(mem, Replay(acts.actions)).run(e.utterance)


def zero_outputs(parser):
    for t in (parser.f_W2, parser.f_b2, parser.h_w, parser.h_b):
        t.data[...] = 0.0


def test_trace_actions():
    mem = sample.trace_memory()
    acts = derive_gold_actions(gold("John 's parents"), mem, sample_grammar())
    assert acts.actions == [Retrieve((), 0), Decide((0,), True), Retrieve((0,), 1),
                            Decide((1,), True), Retrieve((1,), 2)]


def test_memory_utterance_is_one_lookup():
    mem = sample.sample_memory()
    g = sample_grammar()
    for rule_id, e in mem.items():
        acts = derive_gold_actions(e, mem, g)
        assert acts.retrievals == 1
        assert acts.actions[0] == Retrieve((), mem.index_of(e.domain, rule_id))
        assert all(not a.replace for a in acts.actions[1:])


def test_replay_reproduces_gold():
    g = sample_grammar()
    mem = sample.sample_memory()
    for e in sample.sample_examples():
        acts = derive_gold_actions(e, mem, g)
        assert replay(mem, e, acts) == e.logical_form


def test_replay_person_domain():
    g_old, g_new = load_builtin("person")
    b = build_dataset(g_old, g_new, DatasetConfig(d_old=300, e_old=20, e_new=20))
    mem = Memory(b.m_old)
    for e in b.d_old + b.e_old:
        acts = derive_gold_actions(e, mem, g_old)
        assert replay(mem, e, acts) == e.logical_form


def test_missing_rule_reported():
    mem = Memory([r for r in sample.sample_memory().items() if r[0] != "g8"])
    with pytest.raises(TrainingError):
        train(small_parser(), [gold("John 's parents")], mem, sample_grammar(), TrainConfig(epochs=1))


def test_perfect_scores_cost_nothing():
    tf = TeacherForcing([Retrieve((), 0), Decide((0,), True), Decide((1,), False)])
    tf.lookup((), Tensor(np.array([800.0, 0.0, 0.0])))
    tf.decide((0,), None, Tensor(np.array(800.0)))
    tf.decide((1,), None, Tensor(np.array(-800.0)))
    assert float(ops.sum(ops.stack(tf.terms)).data) == 0.0


def test_zero_model_loss_closed_form():
    p = small_parser()
    zero_outputs(p)
    mem = sample.sample_memory()
    g = sample_grammar()
    mem.encode(p)
    k = len(mem)
    for text in ("parents of Mary 's friends", "John", "Bob 's children"):
        e = gold(text, g)
        acts = derive_gold_actions(e, mem, g)
        loss, _ = sequence_nll(p, e, acts, mem)
        want = acts.retrievals * math.log(k) + acts.decisions * math.log(2)
        assert abs(float(loss.data) - want) < 1e-12


def test_loss_gradcheck_toy():
    with using_dtype(np.float64):
        p = small_parser(3)
        mem = sample.sample_memory()
        g = sample_grammar()
        mem.encode(p)
        exs = [gold(t, g) for t in ("parents of Mary 's friends", "John 's children", "Alice")]
        acts = [derive_gold_actions(e, mem, g) for e in exs]

        def loss():
            return ops.sum(ops.stack([sequence_nll(p, e, a, mem)[0] for e, a in zip(exs, acts)]))

        rep = grad_check(loss, p.store, 1e-4, samples=6, floor=1e-5)
    assert rep.passed, str(rep)


def test_loss_nonnegative():
    p = small_parser()
    mem = sample.sample_memory()
    g = sample_grammar()
    mem.encode(p)
    for e in sample.sample_examples()[:30]:
        loss, _ = sequence_nll(p, e, derive_gold_actions(e, mem, g), mem)
        assert float(loss.data) >= 0.0


def test_zero_epochs_keep_params():
    p = small_parser()
    before = {k: v.copy() for k, v in p.store.state().items()}
    hist = train(p, sample.sample_examples()[:5], sample.sample_memory(), sample_grammar(), TrainConfig(epochs=0))
    assert hist == []
    for k, v in p.store.state().items():
        assert np.array_equal(v, before[k])


def run_short(seed=5):
    p = small_parser()
    mem = sample.sample_memory()
    hist = train(p, sample.sample_examples()[:20], mem, sample_grammar(),
                 TrainConfig(epochs=2, seed=seed, dev_every=1))
    for rec in hist:
        rec.pop("seconds")
    return hist, p.store.state()


def test_training_deterministic():
    h1, s1 = run_short()
    h2, s2 = run_short()
    assert h1 == h2
    for k in s1:
        assert s1[k].tobytes() == s2[k].tobytes()


def test_history_fields():
    hist, _ = run_short()
    assert [r["epoch"] for r in hist] == [1, 2]
    for r in hist:
        assert {"mean_loss", "action_accuracy", "parse_accuracy"} <= set(r)


def test_training_leaves_memory_examples_alone():
    mem = sample.sample_memory()
    before = mem.items()
    train(small_parser(), sample.sample_examples()[:10], mem, sample_grammar(), TrainConfig(epochs=1))
    assert mem.items() == before


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)


def test_pretrain_snapshot_names():
    p = small_parser()
    snap = pretrain_encoders(p, sample.sample_examples()[:5], sample.sample_memory(), sample_grammar(),
                             TrainConfig(epochs=1))
    assert set(snap) == set(p.encoder_names())
    assert all(name.startswith(Encoders.PREFIXES) for name in snap)
    assert not any(name.startswith(("look.", "align.", "disc.")) for name in snap)


def test_frozen_encoders_stay_put():
    src = small_parser(4)
    snap = pretrain_encoders(src, sample.sample_examples()[:5], sample.sample_memory(), sample_grammar(),
                             TrainConfig(epochs=1))
    p = small_parser(5)
    load_encoders(p, snap, freeze=True)
    others = {k: v.copy() for k, v in p.store.state().items() if k not in snap}
    train(p, sample.sample_examples()[:10], sample.sample_memory(), sample_grammar(), TrainConfig(epochs=2))
    after = p.store.state()
    for k in snap:
        assert after[k].tobytes() == snap[k].tobytes(), k
    assert any(not np.array_equal(after[k], v) for k, v in others.items())


class Probe(TeacherForcing):
    """Teacher forcing that also records (p_fail, gold replace) per decision."""

    def __init__(self, actions):
        super().__init__(actions)
        self.seen = []

    def decide(self, path, node, logit):
        replace = super().decide(path, node, logit)
        self.seen.append((1.0 / (1.0 + math.exp(-float(logit.data))), replace))
        return replace


def test_sanity_model_separates_keep_and_replace(sanity_model):
    p = Parser.load(sanity_model[0])
    mem = sample.sample_memory()
    g = sample_grammar()
    mem.encode(p)
    for e in sample.sample_examples():
        probe = Probe(derive_gold_actions(e, mem, g).actions)
        p.run(mem, e.utterance, probe)
        for p_fail, replace in probe.seen:
            assert (p_fail > 0.5) if replace else (p_fail < 0.5), (e, p_fail, replace)
