import random

import pytest

from lookadapt.scfg import load_builtin, sample_example
from lookadapt.sexpr import (Leaf, MalformedExpression, Node, NodeNotFound, depth, lf_equal, parse_sexpr,
                             render_sexpr, replace_subtree, tokenize_lf)


def test_parse_flat_node():
    assert parse_sexpr("(field parent john)") == Node("field", (Leaf("parent"), Leaf("john")))


def test_parse_atom():
    assert parse_sexpr("john") == Leaf("john")


def test_parse_nested():
    lf = parse_sexpr("(field parent (field friend john))")
    assert depth(lf) == 3
    assert lf.children[1] == Node("field", (Leaf("friend"), Leaf("john")))


@pytest.mark.parametrize("text", ["(field parent john", "field parent)", "()", "(field) x", "", "(a b) c"])
def test_malformed(text):
    with pytest.raises(MalformedExpression):
        parse_sexpr(text)


def test_render():
    assert render_sexpr(Node("field", (Leaf("friend"), Leaf("john")))) == "(field friend john)"
    assert render_sexpr(Leaf("john")) == "john"


def test_render_normalizes_whitespace():
    assert render_sexpr(parse_sexpr("  ( field\n parent   john ) ")) == "(field parent john)"


def test_round_trip_generated_forms():
    g_old, _ = load_builtin("person")
    rng = random.Random(0)
    for _ in range(1000):
        e = sample_example(g_old, rng.randrange(10**9), 3)
        text = render_sexpr(e.logical_form)
        assert render_sexpr(parse_sexpr(text)) == text
        assert parse_sexpr(text) == e.logical_form


def test_tokenize_flat():
    spans = tokenize_lf(parse_sexpr("(field parent john)"))
    assert spans.tokens == ("(", "field", "parent", "john", ")")
    assert list(spans.span((1,))) == [4]


def test_tokenize_leaf():
    spans = tokenize_lf(Leaf("john"))
    assert spans.tokens == ("john",)
    assert list(spans.span(())) == [1]


def test_tokenize_inner_subtree_span():
    # ( field parent ( field friend john ) )
    # 1 2     3      4 5     6      7    8 9
    spans = tokenize_lf(parse_sexpr("(field parent (field friend john))"))
    assert list(spans.span((1,))) == [4, 5, 6, 7, 8]
    assert spans.head_index((1,)) == 5


def test_lf_equal():
    a = parse_sexpr("(field parent john)")
    assert lf_equal(a, parse_sexpr("(field parent john)"))
    assert not lf_equal(a, parse_sexpr("(field friend john)"))


def test_lf_equal_typed_form():
    text = "(field (relation parent) (person john))"
    lf = parse_sexpr(text)
    assert render_sexpr(lf) == text
    assert lf_equal(lf, parse_sexpr(render_sexpr(lf)))


def test_replace_leaf():
    lf = parse_sexpr("(field friend john)")
    assert replace_subtree(lf, (1,), Leaf("mary")) == parse_sexpr("(field friend mary)")


def test_replace_root():
    x = parse_sexpr("(field child bob)")
    assert replace_subtree(parse_sexpr("(field friend john)"), (), x) == x


def test_replace_inner():
    lf = parse_sexpr("(field parent (field friend john))")
    assert replace_subtree(lf, (1,), Leaf("mary")) == parse_sexpr("(field parent mary)")


def test_replace_missing_node():
    with pytest.raises(NodeNotFound):
        replace_subtree(parse_sexpr("(field friend john)"), (5,), Leaf("mary"))
    with pytest.raises(NodeNotFound):
        replace_subtree(Leaf("john"), (0,), Leaf("mary"))


def test_replace_does_not_mutate():
    lf = parse_sexpr("(field friend john)")
    replace_subtree(lf, (1,), Leaf("mary"))
    assert render_sexpr(lf) == "(field friend john)"


def test_depth():
    assert depth(Leaf("john")) == 1
    assert depth(parse_sexpr("(field friend john)")) == 2
    assert depth(parse_sexpr("(field parent (field friend john))")) == 3
