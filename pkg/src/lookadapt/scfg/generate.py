"""Sampling, enumeration and membership over a grammar's domain."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..sexpr import LogicalForm, Leaf, depth as lf_depth, render_sexpr
from .grammar import INF, Deriv, Grammar, Rule, Slot, parse_slot, realize

P_RECURSE = 0.5


class DepthUnsatisfiable(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Example:
    utterance: Tuple[str, ...]
    logical_form: LogicalForm
    domain: str
    depth: int
    derivation: Deriv

    @property
    def text(self) -> str:
        return " ".join(self.utterance)

    @property
    def key(self) -> Tuple[str, str]:
        return self.text, render_sexpr(self.logical_form)

    @property
    def rule_id(self) -> str:
        return self.derivation.rule

    def __str__(self):
        return f"<{self.text}, {render_sexpr(self.logical_form)}>"


def make_example(grammar: Grammar, deriv: Deriv, domain: Optional[str] = None) -> Example:
    words, lf = realize(grammar, deriv)
    return Example(words, lf, domain or grammar.name, lf_depth(lf), deriv)


def tokenize_utterance(text: str) -> Tuple[str, ...]:
    """Whitespace split that also detaches a possessive ``'s``."""
    out = []
    for tok in text.split():
        low = tok.lower()
        if low.endswith("'s") and len(tok) > 2:
            out.extend([tok[:-2], "'s"])
        else:
            out.append(tok)
    return tuple(out)


# -- sampling ------------------------------------------------------------------

def _slot_budgets(rule: Rule, budget):
    """Depth budget of each slot: the slot leaf sits ``len(path)`` levels below the root."""
    return {k: budget - len(p) for k, p in rule.slot_paths.items()}


def sample_derivation(g: Grammar, rng: random.Random, max_depth: int,
                      nonterminal: Optional[str] = None, p_recurse: float = P_RECURSE) -> Deriv:
    if max_depth < 1:
        raise DepthUnsatisfiable("max_depth must be >= 1")
    mins = g.min_depths()

    def expand(nt, budget):
        feasible = [r for r in g.by_lhs[nt] if g.rule_min_depth(r, mins) <= budget]
        if not feasible:
            raise DepthUnsatisfiable(f"{nt} has no expansion within depth {budget}")
        lexical = [r for r in feasible if r.is_lexical]
        phrasal = [r for r in feasible if not r.is_lexical]
        if lexical and phrasal:
            group = phrasal if rng.random() < p_recurse else lexical
        else:
            group = lexical or phrasal
        rule = group[rng.randrange(len(group))]
        budgets = _slot_budgets(rule, budget)
        return Deriv(rule.id, tuple(expand(rule.slots[k], budgets[k]) for k in rule.slots))

    return expand(nonterminal or g.start, max_depth)


def sample_example(g: Grammar, seed: int, max_depth: int, nonterminal: Optional[str] = None) -> Example:
    rng = random.Random(seed)
    return make_example(g, sample_derivation(g, rng, max_depth, nonterminal))


# -- enumeration -----------------------------------------------------------------

def enumerate_derivations(g: Grammar, max_depth: int, nonterminal: Optional[str] = None,
                          rule: Optional[Rule] = None, cap: int = 200_000) -> List[Deriv]:
    mins = g.min_depths()
    memo: Dict[Tuple[str, int], List[Deriv]] = {}

    def of_rule(r, budget):
        if g.rule_min_depth(r, mins) > budget:
            return []
        budgets = _slot_budgets(r, budget)
        pools = [of_nt(r.slots[k], budgets[k]) for k in r.slots]
        size = 1
        for p in pools:
            size *= len(p)
        if size > cap:
            raise BudgetExceeded(f"rule {r.id} expands to {size} derivations (cap {cap})")
        return [Deriv(r.id, tuple(kids)) for kids in itertools.product(*pools)]

    def of_nt(nt, budget):
        key = (nt, budget)
        if key not in memo:
            out = []
            for r in g.by_lhs[nt]:
                out.extend(of_rule(r, budget))
                if len(out) > cap:
                    raise BudgetExceeded(f"{nt} at depth {budget} exceeds {cap} derivations")
            memo[key] = out
        return memo[key]

    if rule is not None:
        return of_rule(rule, max_depth)
    return of_nt(nonterminal or g.start, max_depth)


def enumerate_domain(g: Grammar, max_depth: int, nonterminal: Optional[str] = None,
                     cap: int = 200_000) -> List[Example]:
    """Every distinct (utterance, logical form) pair up to ``max_depth``, in derivation order."""
    seen = set()
    out = []
    for d in enumerate_derivations(g, max_depth, nonterminal, cap=cap):
        ex = make_example(g, d)
        if ex.key not in seen:
            seen.add(ex.key)
            out.append(ex)
    return out


# -- membership ------------------------------------------------------------------

def _norm(word: str) -> str:
    return word.lower()


def _match_template(rule: Rule, lf: LogicalForm):
    """Bind the rule's slots against ``lf``; None when the constant parts disagree."""
    bindings = {}

    def walk(tpl, node, path):
        if isinstance(tpl, Leaf):
            slot = parse_slot(tpl.symbol)
            if slot is not None and rule.slot_paths.get(slot.index) == path:
                bindings[slot.index] = node
                return True
            return isinstance(node, Leaf) and node.symbol == tpl.symbol
        if isinstance(node, Leaf) or node.head != tpl.head or len(node.children) != len(tpl.children):
            return False
        return all(walk(t, n, path + (i,)) for i, (t, n) in enumerate(zip(tpl.children, node.children)))

    return bindings if walk(rule.target, lf, ()) else None


def contains(g: Grammar, e, category: Optional[str] = None) -> bool:
    """True iff some derivation from ``category`` (default: start) yields exactly e's pair."""
    words = tuple(_norm(w) for w in e.utterance)
    memo = {}

    def match_nt(nt, lf, i, j):
        key = (nt, lf, i, j)
        if key not in memo:
            memo[key] = False
            memo[key] = any(match_rule(r, lf, i, j) for r in g.by_lhs.get(nt, ()))
        return memo[key]

    def match_rule(r, lf, i, j):
        b = _match_template(r, lf)
        if b is None:
            return False
        return match_source(r.source, 0, i, j, b)

    def match_source(items, k, i, j, b):
        if k == len(items):
            return i == j
        rest = len(items) - k - 1
        item = items[k]
        if not isinstance(item, Slot):
            return i < j and words[i] == _norm(item) and match_source(items, k + 1, i + 1, j, b)
        for m in range(i + 1, j - rest + 1):
            if match_nt(item.nonterminal, b[item.index], i, m) and match_source(items, k + 1, m, j, b):
                return True
        return False

    return match_nt(category or g.start, e.logical_form, 0, len(words))


def parse_source(g: Grammar, words: Sequence[str], category: Optional[str] = None,
                 limit: int = 64) -> List[Deriv]:
    """All derivations (up to ``limit``) whose source side yields ``words``."""
    words = tuple(_norm(w) for w in words)
    memo: Dict[tuple, List[Deriv]] = {}

    def of_nt(nt, i, j):
        key = (nt, i, j)
        if key in memo:
            return memo[key]
        memo[key] = []
        out = []
        for r in g.by_lhs.get(nt, ()):
            for kids in of_source(r.source, 0, i, j):
                out.append(Deriv(r.id, tuple(kid for _, kid in sorted(kids))))
                if len(out) >= limit:
                    break
        memo[key] = out
        return out

    def of_source(items, k, i, j):
        if k == len(items):
            return [[]] if i == j else []
        item = items[k]
        rest = len(items) - k - 1
        if not isinstance(item, Slot):
            if i < j and words[i] == _norm(item):
                return of_source(items, k + 1, i + 1, j)
            return []
        out = []
        for m in range(i + 1, j - rest + 1):
            heads = of_nt(item.nonterminal, i, m)
            if not heads:
                continue
            for tail in of_source(items, k + 1, m, j):
                for h in heads:
                    out.append([(item.index, h)] + tail)
                    if len(out) >= limit:
                        return out
        return out

    return of_nt(category or g.start, 0, len(words))


def is_ambiguous(g: Grammar, e: Example, category: Optional[str] = None) -> bool:
    """True when the utterance has parses with different logical forms."""
    forms = set()
    for d in parse_source(g, e.utterance, category):
        forms.add(realize(g, d)[1])
        if len(forms) > 1:
            return True
    return False
