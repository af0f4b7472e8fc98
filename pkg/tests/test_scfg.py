import random

import pytest

from lookadapt.scfg import (DOMAINS, BudgetExceeded, DatasetConfig, Deriv, DepthUnsatisfiable, Example,
                            GrammarParseError, InsufficientNovelExamples, UncoverableRule,
                            UnproducibleNonterminal, build_dataset, build_memory, builtin_grammars,
                            bundle_from_jsonl, contains, enumerate_derivations, enumerate_domain, load_builtin, load_domain, load_grammar,
                            make_example, memory_pool, realize, sample_example, sample_grammar,
                            tokenize_utterance)
from lookadapt.scfg.grammar import Grammar, parse_slot
from lookadapt.sexpr import Leaf, depth, parse_sexpr, render_sexpr

SMALL = DatasetConfig(d_old=200, e_old=40, e_new=40, seed=3)


def pair(text, lf):
    return tokenize_utterance(text), parse_sexpr(lf)


def ex(text, lf):
    words, form = pair(text, lf)
    return Example(words, form, "test", depth(form), Deriv("unknown"))


def has_pair(examples, text, lf):
    want = pair(text, lf)
    return any((e.utterance, e.logical_form) == want for e in examples)


def count_derivations(g, nt, budget, memo=None):
    """Independent count of derivations of ``nt`` whose form has depth <= budget."""
    memo = {} if memo is None else memo
    key = (nt, budget)
    if key in memo:
        return memo[key]
    total = 0
    for r in g.by_lhs[nt]:
        total += _count_rule(g, r, r.target, budget, memo)
    memo[key] = total
    return total


def _count_rule(g, r, node, budget, memo):
    if budget < 1:
        return 0
    if isinstance(node, Leaf):
        slot = parse_slot(node.symbol)
        return count_derivations(g, slot.nonterminal, budget, memo) if slot else 1
    n = 1
    for child in node.children:
        n *= _count_rule(g, r, child, budget - 1, memo)
    return n


# -- grammar loading ---------------------------------------------------------

def test_load_composite_rule():
    g = load_grammar("g1: FIELD -> PSN_2 's PSN_REL_1 | (field PSN_REL_1 PSN_2)\n"
                     "g7: PSN_REL -> friends | friend\ng3: PSN -> John | john\n")
    r = g.by_id["g1"]
    assert r.lhs == "FIELD"
    assert r.slots == {1: "PSN_REL", 2: "PSN"}
    assert r.target_text() == "(field PSN_REL_1 PSN_2)"
    assert r.slot_paths == {1: (0,), 2: (1,)}


def test_load_terminal_rule():
    g = load_grammar("g2: PSN -> John | (person john)")
    r = g.by_id["g2"]
    assert r.is_lexical
    assert r.source == ("John",)
    assert r.target == parse_sexpr("(person john)")


def test_duplicate_rule_id():
    with pytest.raises(GrammarParseError):
        load_grammar("g1: PSN -> John | john\ng1: PSN -> Mary | mary\n")


@pytest.mark.parametrize("text", [
    "g1: PSN John | john",
    "g1: PSN -> John",
    "g1: PSN -> PSN_REL_1 of John | (field PSN_REL_2 john)",
    "g1: PSN -> John | (field john",
])
def test_bad_rule_lines(text):
    with pytest.raises(GrammarParseError):
        load_grammar(text)


def test_unproducible_nonterminal():
    with pytest.raises(UnproducibleNonterminal):
        load_grammar("g1: PSN -> REL_1 of PSN_2 | (field REL_1 PSN_2)\ng2: REL -> friends | friend\n")


def test_to_text_round_trip():
    g = sample_grammar()
    again = load_grammar(g.to_text())
    assert [str(r) for r in again.rules] == [str(r) for r in g.rules]


# -- sampling ----------------------------------------------------------------

def test_sample_can_produce_appendix_pair():
    g = sample_grammar()
    outputs = {sample_example(g, s, 3).key for s in range(3000)}
    assert ("John 's parents", "(field parent john)") in outputs


def test_sample_single_terminal_grammar():
    g = load_grammar("only: PSN -> John | john")
    for seed in range(20):
        e = sample_example(g, seed, 2)
        assert e.key == ("John", "john")


def test_sample_deterministic():
    g, _ = load_builtin("person")
    assert sample_example(g, 42, 3) == sample_example(g, 42, 3)


def test_sample_respects_depth():
    g, _ = load_builtin("restaurant")
    for seed in range(300):
        e = sample_example(g, seed, 3)
        assert depth(e.logical_form) <= 3
        assert realize(g, e.derivation) == (e.utterance, e.logical_form)


def test_depth_unsatisfiable():
    g = load_grammar("g1: PSN -> REL_1 of John | (field REL_1 john)\ng2: REL -> friends | friend")
    with pytest.raises(DepthUnsatisfiable):
        sample_example(g, 0, 1)


# -- enumeration -------------------------------------------------------------

def test_enumerate_contains_table_pairs():
    dom = enumerate_domain(sample_grammar(), 3)
    assert has_pair(dom, "friends of John", "(field friend john)")
    assert has_pair(dom, "parents of Mary 's friends", "(field parent (field friend mary))")


def test_enumerate_depth_one_is_terminal_rules():
    g = sample_grammar()
    got = {e.key for e in enumerate_domain(g, 1)}
    want = {(r.source_text(), r.target_text()) for r in g.by_lhs[g.start] if r.is_lexical}
    assert got == want


def test_enumerate_duplicate_free():
    dom = enumerate_domain(sample_grammar(), 3)
    assert len({e.key for e in dom}) == len(dom)


@pytest.mark.parametrize("max_depth", [1, 2, 3, 4])
def test_enumerate_count_matches_counter(max_depth):
    g = sample_grammar()
    derivs = enumerate_derivations(g, max_depth)
    assert len(derivs) == count_derivations(g, g.start, max_depth)
    # pairs reachable by two derivations ("friends of John 's friends") collapse to one
    assert len(enumerate_domain(g, max_depth)) == len({make_example(g, d).key for d in derivs})


def test_enumerate_count_sample_depth_three():
    # 4 names + 2 composite rules * 3 relations * 28 depth-2 persons, less 12 doubled pairs
    g = sample_grammar()
    assert count_derivations(g, g.start, 3) == 172
    assert len(enumerate_domain(g, 3)) == 160


def test_enumerate_count_person_domain():
    g, _ = load_builtin("person")
    assert len(enumerate_derivations(g, 2)) == count_derivations(g, g.start, 2)


def test_enumerate_budget():
    g, _ = load_builtin("person")
    with pytest.raises(BudgetExceeded):
        enumerate_domain(g, 3, cap=100)


# -- membership --------------------------------------------------------------

def test_contains_table_pair():
    g = sample_grammar()
    assert contains(g, ex("friends of John", "(field friend john)"))


def test_contains_rejects_unknown_predicate():
    g = sample_grammar()
    assert not contains(g, ex("cousins of John", "(field cousin john)"))
    assert not contains(g, ex("friends of John", "(field friend mary)"))


def test_contains_agrees_with_enumeration():
    g = sample_grammar()
    dom = enumerate_domain(g, 3)
    known = {e.key for e in dom}
    for e in dom:
        assert contains(g, e)
    # every utterance at depth <= 3 paired with every form: verdicts match set membership
    texts = sorted({e.text for e in dom})[:40]
    forms = sorted({render_sexpr(e.logical_form) for e in dom})[:40]
    for t in texts:
        for f in forms:
            assert contains(g, ex(t, f)) == ((t, f) in known)


# -- memory ------------------------------------------------------------------

def test_memory_field_rule_rooted_at_field():
    g = sample_grammar()
    mem = dict(build_memory(g, memory_pool(g)))
    assert mem["g1"].logical_form.head == "field"
    assert mem["g1"].derivation.rule == "g1"


def test_memory_terminal_rule_is_itself():
    g = sample_grammar()
    mem = dict(build_memory(g, memory_pool(g)))
    assert mem["g3"].key == ("John", "john")


def test_memory_ignores_mismatched_root():
    g = load_grammar("g1: PSN -> PSN_REL_1 of PSN_2 | (field PSN_REL_1 PSN_2)\n"
                     "g2: PSN -> John | (person john)\ng3: PSN_REL -> children | child\n")
    children = make_example(g, Deriv("g1", (Deriv("g3"), Deriv("g2"))))
    john = make_example(g, Deriv("g2"))
    rel = make_example(g, Deriv("g3"))
    mem = dict(build_memory(g, [children, john, rel]))
    assert mem["g2"].key == ("John", "(person john)")
    # a pool that only reaches g2 through g1 cannot cover g2
    bad = Example(children.utterance, children.logical_form, "x", 2, Deriv("g2"))
    with pytest.raises(UncoverableRule):
        build_memory(g, [children, bad, rel])


# -- builtin domains -----------------------------------------------------------

def test_six_domains():
    assert set(builtin_grammars()) == set(DOMAINS)
    assert set(DOMAINS) == {"person", "restaurant", "event", "course", "animal", "vehicle"}


def test_person_set_field_shape():
    g, _ = load_builtin("person")
    assert contains(g, ex("set the address of John to the address of Mary",
                            "(set (field address john) (field address mary))"))


def test_new_rules_disjoint():
    for name, (g_old, g_new) in builtin_grammars().items():
        assert len(g_new.rules) >= 3
        assert not set(g_old.by_id) & set(g_new.by_id)
        old_pairs = {(r.lhs, r.source_text(), r.target_text()) for r in g_old.rules}
        for r in g_new.rules:
            assert (r.lhs, r.source_text(), r.target_text()) not in old_pairs


def test_domains_have_both_topics():
    for name, (g_old, _) in builtin_grammars().items():
        heads = {r.root_predicate for r in g_old.by_lhs[g_old.start]}
        assert {"field", "set"} <= heads, name


# -- dataset -------------------------------------------------------------------

@pytest.fixture(scope="module")
def person_bundle():
    g_old, g_new = load_builtin("person")
    return build_dataset(g_old, g_new, SMALL)


def test_bundle_memory_per_rule(person_bundle):
    g_old, g_new = load_builtin("person")
    assert [r for r, _ in person_bundle.m_old] == [r.id for r in g_old.rules]
    assert [r for r, _ in person_bundle.m_new_prime] == [r.id for r in g_new.rules]


def test_bundle_new_examples_need_new_rules(person_bundle):
    g_old, g_new = load_builtin("person")
    g_all = g_old.extend(g_new)
    for e in person_bundle.e_new:
        assert not contains(g_old, e)
        assert contains(g_all, e)
    for e in person_bundle.d_old + person_bundle.e_old:
        assert contains(g_old, e)


def test_bundle_splits(person_bundle):
    b = person_bundle
    assert len(b.d_old) == SMALL.d_old
    assert abs(len(b.e_new_dev) - len(b.e_new_test)) <= 1
    assert abs(len(b.e_old_dev) - len(b.e_old_test)) <= 1
    assert not {e.key for e in b.e_new_dev} & {e.key for e in b.e_new_test}
    train = {e.key for e in b.d_old}
    assert not train & {e.key for e in b.e_new + b.e_old}
    for e in b.e_new + b.e_old:
        assert 2 <= e.depth <= SMALL.max_depth


def test_bundle_deterministic(person_bundle):
    g_old, g_new = load_builtin("person")
    again = build_dataset(g_old, g_new, SMALL)
    assert again.to_jsonl() == person_bundle.to_jsonl()


def test_bundle_jsonl_round_trip(person_bundle):
    again = bundle_from_jsonl(person_bundle.to_jsonl())
    assert again.to_jsonl() == person_bundle.to_jsonl()


def test_bundle_without_new_rules():
    g_old, _ = load_builtin("animal")
    b = build_dataset(g_old, Grammar("none", g_old.start, [], validate=False),
                      DatasetConfig(d_old=50, e_old=10, e_new=10))
    assert b.e_new == [] and b.m_new_prime == []


TINY = """
%start PSN
q: PSN -> REL_1 of PSN_2 | (field REL_1 PSN_2)
john: PSN -> John | john
bob: PSN -> Bob | bob
friend: REL -> friends | friend
%new
mary: PSN -> Mary | mary
"""


def test_bundle_too_many_novel():
    g_old, g_new = load_domain(TINY, "tiny")
    # the only novel depth-2 pair is <friends of Mary, (field friend mary)>
    b = build_dataset(g_old, g_new, DatasetConfig(d_old=1, e_old=0, e_new=1, max_depth=2))
    assert [e.key for e in b.e_new] == [("friends of Mary", "(field friend mary)")]
    with pytest.raises(InsufficientNovelExamples):
        build_dataset(g_old, g_new, DatasetConfig(d_old=1, e_old=0, e_new=2, max_depth=2))


def test_tokenize_possessive():
    assert tokenize_utterance("John's Parents") == ("John", "'s", "Parents")
    assert tokenize_utterance("parents of Mary 's friends") == ("parents", "of", "Mary", "'s", "friends")
