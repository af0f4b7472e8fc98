"""Synchronous CFG rules, the grammar text format, and derivation trees.

Grammar text, one rule per line::

    %domain person
    %start PSN
    g1: PSN -> PSN_2 's PSN_REL_1 | (field PSN_REL_1 PSN_2)
    g2: PSN -> John | john

The ``ID:`` prefix is optional (ids default to ``r<line>``).  Indexed
nonterminals are written ``NAME_k``; the same indices must occur exactly once
on each side.  ``#`` starts a comment line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..sexpr import Leaf, LogicalForm, MalformedExpression, Node, Path, parse_sexpr, render_sexpr

_SLOT_RE = re.compile(r"^([A-Z][A-Z0-9]*(?:_[A-Z][A-Z0-9]*)*)_(\d+)$")
_NT_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")
_ID_RE = re.compile(r"^[A-Za-z0-9_.\-']+$")

INF = float("inf")


class GrammarParseError(ValueError):
    pass


class UnproducibleNonterminal(GrammarParseError):
    pass


@dataclass(frozen=True)
class Slot:
    nonterminal: str
    index: int

    def __str__(self):
        return f"{self.nonterminal}_{self.index}"


SourceItem = Union[str, Slot]


def parse_slot(token: str) -> Optional[Slot]:
    m = _SLOT_RE.match(token)
    if not m:
        return None
    return Slot(m.group(1), int(m.group(2)))


@dataclass(frozen=True)
class Rule:
    id: str
    lhs: str
    source: Tuple[SourceItem, ...]
    target: LogicalForm
    # slot index -> path of the slot leaf inside ``target``
    slot_paths: Dict[int, Path] = field(compare=False, hash=False)
    slots: Dict[int, str] = field(compare=False, hash=False)

    @property
    def root_predicate(self) -> str:
        return self.target.head

    @property
    def is_lexical(self) -> bool:
        return not self.slots

    def source_text(self) -> str:
        return " ".join(str(s) for s in self.source)

    def target_text(self) -> str:
        return render_sexpr(self.target)

    def __str__(self):
        return f"{self.id}: {self.lhs} -> {self.source_text()} | {self.target_text()}"


def _template_slots(lf, path=()):
    if isinstance(lf, Leaf):
        slot = parse_slot(lf.symbol)
        return [(slot, path)] if slot else []
    out = []
    for i, child in enumerate(lf.children):
        out.extend(_template_slots(child, path + (i,)))
    return out


def make_rule(rule_id: str, lhs: str, source: Sequence[str], target: Union[str, LogicalForm]) -> Rule:
    if not _NT_RE.match(lhs):
        raise GrammarParseError(f"rule {rule_id}: bad left-hand side {lhs!r}")
    if not source:
        raise GrammarParseError(f"rule {rule_id}: empty source side")
    if isinstance(target, str):
        try:
            target = parse_sexpr(target)
        except MalformedExpression as exc:
            raise GrammarParseError(f"rule {rule_id}: bad target: {exc}") from None
    items: List[SourceItem] = []
    src_slots: Dict[int, str] = {}
    for tok in source:
        slot = parse_slot(tok)
        if slot is None:
            items.append(tok)
            continue
        if slot.index in src_slots:
            raise GrammarParseError(f"rule {rule_id}: index {slot.index} repeated in source")
        src_slots[slot.index] = slot.nonterminal
        items.append(slot)
    tgt_slots: Dict[int, str] = {}
    slot_paths: Dict[int, Path] = {}
    for slot, path in _template_slots(target):
        if slot.index in tgt_slots:
            raise GrammarParseError(f"rule {rule_id}: index {slot.index} repeated in target")
        tgt_slots[slot.index] = slot.nonterminal
        slot_paths[slot.index] = path
    if src_slots != tgt_slots:
        raise GrammarParseError(
            f"rule {rule_id}: source and target nonterminals differ "
            f"({sorted(src_slots.items())} vs {sorted(tgt_slots.items())})")
    if () in slot_paths.values():
        raise GrammarParseError(f"rule {rule_id}: target has no root predicate (bare nonterminal)")
    if parse_slot(target.head):
        raise GrammarParseError(f"rule {rule_id}: nonterminal used as a head predicate")
    return Rule(rule_id, lhs, tuple(items), target, slot_paths, dict(sorted(src_slots.items())))


class Grammar:
    def __init__(self, name: str, start: str, rules: Sequence[Rule], validate: bool = True):
        self.name = name
        self.start = start
        self.rules: Tuple[Rule, ...] = tuple(rules)
        self.by_id: Dict[str, Rule] = {}
        self.by_lhs: Dict[str, List[Rule]] = {}
        for r in self.rules:
            if r.id in self.by_id:
                raise GrammarParseError(f"duplicate rule id {r.id!r}")
            self.by_id[r.id] = r
            self.by_lhs.setdefault(r.lhs, []).append(r)
        self._min_depth = None
        if validate:
            self.validate()

    def __repr__(self):
        return f"Grammar({self.name!r}, start={self.start!r}, rules={len(self.rules)})"

    def __len__(self):
        return len(self.rules)

    def __contains__(self, rule_id):
        return rule_id in self.by_id

    @property
    def nonterminals(self) -> List[str]:
        return list(self.by_lhs)

    def validate(self):
        if self.start not in self.by_lhs:
            raise UnproducibleNonterminal(f"start symbol {self.start!r} has no rules")
        for r in self.rules:
            for nt in r.slots.values():
                if nt not in self.by_lhs:
                    raise UnproducibleNonterminal(f"{nt} (used in rule {r.id}) has no rules")
        depths = self.min_depths()
        for nt in self.by_lhs:
            if depths[nt] == INF:
                raise UnproducibleNonterminal(f"{nt} cannot derive a finite expression")

    def min_depths(self) -> Dict[str, float]:
        """Smallest logical-form depth derivable from each nonterminal."""
        if self._min_depth is not None:
            return self._min_depth
        best = {nt: INF for nt in self.by_lhs}
        changed = True
        while changed:
            changed = False
            for r in self.rules:
                d = self.rule_min_depth(r, best)
                if d < best[r.lhs]:
                    best[r.lhs] = d
                    changed = True
        self._min_depth = best
        return best

    def rule_min_depth(self, rule: Rule, nt_depths=None) -> float:
        nt_depths = nt_depths if nt_depths is not None else self.min_depths()
        return template_depth(rule, lambda k: nt_depths.get(rule.slots[k], INF))

    def extend(self, other: "Grammar", name: Optional[str] = None) -> "Grammar":
        return Grammar(name or self.name, self.start, self.rules + other.rules)

    def to_text(self) -> str:
        lines = [f"%domain {self.name}", f"%start {self.start}"]
        lines += [str(r) for r in self.rules]
        return "\n".join(lines) + "\n"


def template_depth(rule: Rule, slot_depth) -> float:
    """Depth of ``rule.target`` once each slot k is filled with a tree of depth ``slot_depth(k)``."""
    def walk(node, path):
        if isinstance(node, Leaf):
            slot = parse_slot(node.symbol)
            if slot is not None and rule.slot_paths.get(slot.index) == path:
                return slot_depth(slot.index)
            return 1
        return 1 + max(walk(c, path + (i,)) for i, c in enumerate(node.children))
    return walk(rule.target, ())


def _parse_rule_line(line: str, lineno: int) -> Rule:
    if "->" not in line:
        raise GrammarParseError(f"line {lineno}: missing '->'")
    left, right = line.split("->", 1)
    left = left.strip()
    if ":" in left:
        rule_id, lhs = (s.strip() for s in left.split(":", 1))
        if not rule_id or not _ID_RE.match(rule_id):
            raise GrammarParseError(f"line {lineno}: bad rule id {rule_id!r}")
    else:
        rule_id, lhs = f"r{lineno}", left
    if "|" not in right:
        raise GrammarParseError(f"line {lineno}: missing '|' between source and target")
    source, target = right.rsplit("|", 1)
    try:
        return make_rule(rule_id, lhs, source.split(), target.strip())
    except GrammarParseError as exc:
        raise GrammarParseError(f"line {lineno}: {exc}") from None


def parse_rules(text: str):
    """Parse grammar text into (directives, rules); ``%new`` splits the rules in two groups."""
    directives: Dict[str, str] = {}
    groups: List[List[Rule]] = [[]]
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("%"):
            key, _, value = line[1:].partition(" ")
            if key == "new":
                groups.append([])
            elif key in ("start", "domain"):
                directives[key] = value.strip()
            else:
                raise GrammarParseError(f"line {lineno}: unknown directive %{key}")
            continue
        groups[-1].append(_parse_rule_line(line, lineno))
    return directives, groups


def load_grammar(text: str, name: Optional[str] = None) -> Grammar:
    directives, groups = parse_rules(text)
    rules = [r for g in groups for r in g]
    if not rules:
        raise GrammarParseError("grammar has no rules")
    start = directives.get("start", rules[0].lhs)
    return Grammar(name or directives.get("domain", "grammar"), start, rules)


def load_domain(text: str, name: Optional[str] = None) -> Tuple[Grammar, Grammar]:
    """Split a domain file at ``%new`` into the old grammar and its held-out rules."""
    directives, groups = parse_rules(text)
    old = groups[0]
    new = [r for g in groups[1:] for r in g]
    name = name or directives.get("domain", "grammar")
    start = directives.get("start", old[0].lhs if old else "S")
    g_old = Grammar(name, start, old)
    g_new = Grammar(name + "'", start, new, validate=False)
    clash = set(g_old.by_id) & set(g_new.by_id)
    if clash:
        raise GrammarParseError(f"new rules reuse ids {sorted(clash)}")
    g_old.extend(g_new)  # validates the union
    return g_old, g_new


# -- derivations -------------------------------------------------------------

@dataclass(frozen=True)
class Deriv:
    """Derivation tree: the rule used and one sub-derivation per slot, in index order."""
    rule: str
    kids: Tuple["Deriv", ...] = ()

    def to_list(self) -> list:
        return [self.rule] + [k.to_list() for k in self.kids]

    @classmethod
    def from_list(cls, data) -> "Deriv":
        if isinstance(data, str):
            return cls(data)
        return cls(data[0], tuple(cls.from_list(k) for k in data[1:]))

    def rules_used(self):
        yield self.rule
        for k in self.kids:
            yield from k.rules_used()


def realize(grammar: Grammar, deriv: Deriv) -> Tuple[Tuple[str, ...], LogicalForm]:
    """Replay a derivation into its (utterance words, logical form) pair."""
    rule = grammar.by_id[deriv.rule]
    if len(deriv.kids) != len(rule.slots):
        raise ValueError(f"derivation of {rule.id} has {len(deriv.kids)} children, "
                         f"rule has {len(rule.slots)} slots")
    parts = dict(zip(rule.slots, (realize(grammar, k) for k in deriv.kids)))
    words: List[str] = []
    for item in rule.source:
        if isinstance(item, Slot):
            words.extend(parts[item.index][0])
        else:
            words.append(item)
    return tuple(words), fill_template(rule, {k: v[1] for k, v in parts.items()})


def fill_template(rule: Rule, fillers: Dict[int, LogicalForm]) -> LogicalForm:
    def walk(node, path):
        if isinstance(node, Leaf):
            slot = parse_slot(node.symbol)
            if slot is not None and rule.slot_paths.get(slot.index) == path:
                return fillers[slot.index]
            return node
        return Node(node.head, tuple(walk(c, path + (i,)) for i, c in enumerate(node.children)))
    return walk(rule.target, ())


def derivation_paths(grammar: Grammar, deriv: Deriv, prefix: Path = ()) -> Dict[Path, Deriv]:
    """Map each logical-form path rooted at a derivation node to that node."""
    out = {prefix: deriv}
    rule = grammar.by_id[deriv.rule]
    for idx, kid in zip(rule.slots, deriv.kids):
        out.update(derivation_paths(grammar, kid, prefix + rule.slot_paths[idx]))
    return out
