import random

import numpy as np
import pytest

from lookadapt.encoders import (DimensionMismatch, EmptyInput, Encoders, FileUnreadable, default_vectors_path,
                                encode_logical_form, encode_utterance, load_word_vectors)
from lookadapt.nncore import ParamStore
from lookadapt.scfg import load_builtin, sample_example, tokenize_utterance
from lookadapt.sexpr import Leaf, parse_sexpr, tokenize_lf

TOY = "john 0.1 0.2 0.3 0.4\nmary -1 0 1 2.5\nfriend 3 3 3 3\n"


@pytest.fixture
def toy_path(tmp_path):
    p = tmp_path / "toy.txt"
    p.write_text(TOY)
    return p


def make_encoders(d_h=5, seed=0, tie=False):
    table = load_word_vectors()
    enc = Encoders(table, ParamStore(), d_h, np.random.default_rng(seed))
    if tie:
        # same weights in both directions, so the two halves are comparable
        for coder in (enc.utt, enc.lf):
            for a in ("Wx", "Wh", "b"):
                getattr(coder.bck, a).data[...] = getattr(coder.fwd, a).data
    return enc


def test_toy_file_vocabulary(toy_path):
    t = load_word_vectors(str(toy_path), 4)
    assert len(t) == 3 and t.dim == 4


def test_oov_lookup_is_stable(toy_path):
    t = load_word_vectors(str(toy_path))
    a = t.lookup("zxqv-unknown").copy()
    t2 = load_word_vectors(str(toy_path))
    assert np.array_equal(a, t.lookup("zxqv-unknown"))
    assert np.array_equal(a, t2.lookup("zxqv-unknown"))
    assert not np.array_equal(a, t.lookup("other-unknown"))


def test_known_word_is_file_row():
    path = default_vectors_path()
    with open(path) as fh:
        row = next(line.split() for line in fh if line.split()[0] == "john")
    want = np.array([float(x) for x in row[1:]])
    assert load_word_vectors(path).lookup("john").tobytes() == want.tobytes()


def test_dimension_mismatch(toy_path):
    with pytest.raises(DimensionMismatch):
        load_word_vectors(str(toy_path), 7)


def test_malformed_lines_skipped(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("a 1 2\nb 1 x\nc 1 2 3\nd 4 5\n")
    t = load_word_vectors(str(p))
    assert t.words == ["a", "d"] and t.malformed == 2


def test_unreadable(tmp_path):
    with pytest.raises(FileUnreadable):
        load_word_vectors(str(tmp_path / "missing.txt"))


def test_bundled_vectors():
    t = load_word_vectors()
    assert t.dim == 50 and len(t) >= 150


def test_encode_table_utterance():
    enc = make_encoders()
    X = encode_utterance(enc, tokenize_utterance("friends of John"))
    assert len(X) == 3
    assert X.matrix.shape == (3, 2 * enc.d_h)


def test_empty_utterance():
    with pytest.raises(EmptyInput):
        encode_utterance(make_encoders(), ())


def test_single_word_halves_agree():
    enc = make_encoders(tie=True)
    X = encode_utterance(enc, ("john",)).matrix.data
    assert np.allclose(X[0, :enc.d_h], X[0, enc.d_h:])


def test_reversal_swaps_directions():
    enc = make_encoders(tie=True)
    words = tokenize_utterance("parents of Mary 's friends")
    a = encode_utterance(enc, words).matrix.data
    b = encode_utterance(enc, words[::-1]).matrix.data
    T, h = len(words), enc.d_h
    for i in range(T):
        assert np.allclose(a[i, :h], b[T - 1 - i, h:])
        assert np.allclose(a[i, h:], b[T - 1 - i, :h])


def test_encode_form_columns():
    enc = make_encoders()
    lf = parse_sexpr("(field parent john)")
    Y = encode_logical_form(enc, lf)
    assert len(Y) == 5
    assert Y.tokens[4 - 1] == "john"
    assert np.array_equal(Y.column(4).data, Y.matrix.data[3])


def test_encode_leaf():
    assert len(encode_logical_form(make_encoders(), Leaf("john"))) == 1


def test_token_count_property():
    enc = make_encoders(d_h=2)
    g, _ = load_builtin("course")
    rng = random.Random(1)
    for _ in range(1000):
        lf = sample_example(g, rng.randrange(10**9), 3).logical_form
        Y = encode_logical_form(enc, lf)
        assert Y.matrix.shape[0] == len(tokenize_lf(lf))


def test_every_column_sees_every_token():
    enc = make_encoders()
    words = tokenize_utterance("parents of Mary 's friends")
    base = encode_utterance(enc, words).matrix.data
    for k in range(len(words)):
        changed = list(words)
        changed[k] = "zebra"
        out = encode_utterance(enc, changed).matrix.data
        assert (np.abs(out - base).max(axis=1) > 1e-9).all(), k


def test_encoders_deterministic():
    enc = make_encoders()
    words = ("friends", "of", "john")
    a = encode_utterance(enc, words).matrix.data
    assert np.array_equal(a, encode_utterance(enc, words).matrix.data)
    assert np.array_equal(a, encode_utterance(make_encoders(), words).matrix.data)


def test_parentheses_have_trainable_vectors():
    store = ParamStore()
    Encoders(load_word_vectors(), store, 3, np.random.default_rng(0))
    trainable = {name for name, _ in store.trainable()}
    assert {"emb.lparen", "emb.rparen"} <= trainable
    assert "emb.words" not in trainable
