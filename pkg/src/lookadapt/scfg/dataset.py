"""One-shot dataset construction and the one-example-per-rule memory."""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..sexpr import parse_sexpr, render_sexpr, depth as lf_depth
from .grammar import Deriv, Grammar
from .generate import (BudgetExceeded, Example, contains, enumerate_derivations, is_ambiguous,
                       make_example, sample_derivation)


class UncoverableRule(ValueError):
    def __init__(self, rule_id):
        super().__init__(f"no pool example covers rule {rule_id!r}")
        self.rule_id = rule_id


class InsufficientNovelExamples(RuntimeError):
    pass


MemoryList = List[Tuple[str, Example]]


def root_predicate(lf) -> str:
    return lf.head


def build_memory(g: Grammar, pool: Iterable[Example]) -> MemoryList:
    """Pick, for every rule, the shortest pool example rooted at that rule.

    A candidate's derivation must start with the rule and its logical form must
    share the rule target's root predicate.  Ties go to the shorter utterance,
    then to the lexicographically smaller one.
    """
    by_rule: Dict[str, List[Example]] = {}
    for e in pool:
        by_rule.setdefault(e.derivation.rule, []).append(e)
    memory = []
    for rule in g.rules:
        cands = [e for e in by_rule.get(rule.id, ())
                 if root_predicate(e.logical_form) == rule.root_predicate]
        if not cands:
            raise UncoverableRule(rule.id)
        best = min(cands, key=lambda e: (len(e.utterance), e.text, render_sexpr(e.logical_form)))
        memory.append((rule.id, best))
    return memory


def memory_pool(g: Grammar, rules=None, slack: int = 0, cap: int = 50_000,
                unambiguous: bool = True) -> List[Example]:
    """Shallowest examples rooted at each rule (depth = the rule's minimum plus ``slack``)."""
    out = []
    for rule in (rules if rules is not None else g.rules):
        budget = int(g.rule_min_depth(rule)) + slack
        for d in enumerate_derivations(g, budget, rule=rule, cap=cap):
            e = make_example(g, d)
            if unambiguous and is_ambiguous(g, e, rule.lhs):
                continue
            out.append(e)
    return out


# -- dataset bundle ---------------------------------------------------------------

@dataclass
class DatasetConfig:
    d_old: int = 2000
    e_old: int = 400
    e_new: int = 400
    max_depth: int = 3
    min_depth: int = 2
    seed: int = 13
    unambiguous: bool = True
    attempts_per_example: int = 200


SPLITS = ("D_old", "M_old", "M_new_prime", "E_old_dev", "E_old_test", "E_new_dev", "E_new_test")


@dataclass
class DatasetBundle:
    domain: str
    d_old: List[Example]
    m_old: MemoryList
    m_new_prime: MemoryList
    e_old_dev: List[Example]
    e_old_test: List[Example]
    e_new_dev: List[Example]
    e_new_test: List[Example]

    @property
    def m_new(self) -> MemoryList:
        return list(self.m_old) + list(self.m_new_prime)

    @property
    def e_old(self) -> List[Example]:
        return self.e_old_dev + self.e_old_test

    @property
    def e_new(self) -> List[Example]:
        return self.e_new_dev + self.e_new_test

    def split(self, name: str) -> List[Example]:
        mapping = {
            "D_old": self.d_old,
            "M_old": [e for _, e in self.m_old],
            "M_new_prime": [e for _, e in self.m_new_prime],
            "E_old_dev": self.e_old_dev, "E_old_test": self.e_old_test,
            "E_new_dev": self.e_new_dev, "E_new_test": self.e_new_test,
        }
        return mapping[name]

    def records(self):
        for name in SPLITS:
            for e in self.split(name):
                yield example_record(e, name)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()[:16]


def example_record(e: Example, split: Optional[str] = None) -> dict:
    rec = {
        "utterance": e.text,
        "logical_form": render_sexpr(e.logical_form),
        "domain": e.domain,
        "depth": e.depth,
        "derivation": e.derivation.to_list(),
    }
    if split is not None:
        rec["split"] = split
    return rec


def example_from_record(rec: dict) -> Example:
    lf = parse_sexpr(rec["logical_form"])
    return Example(tuple(rec["utterance"].split()), lf, rec["domain"],
                   int(rec.get("depth", lf_depth(lf))), Deriv.from_list(rec["derivation"]))


def bundle_from_jsonl(text: str) -> DatasetBundle:
    parts: Dict[str, List[Example]] = {name: [] for name in SPLITS}
    domain = None
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        ex = example_from_record(rec)
        domain = domain or ex.domain
        parts[rec["split"]].append(ex)
    return DatasetBundle(
        domain or "unknown", parts["D_old"],
        [(e.rule_id, e) for e in parts["M_old"]],
        [(e.rule_id, e) for e in parts["M_new_prime"]],
        parts["E_old_dev"], parts["E_old_test"], parts["E_new_dev"], parts["E_new_test"])


def write_examples(path, examples: Sequence[Example], split: Optional[str] = None):
    with open(path, "w", encoding="utf-8") as fh:
        for e in examples:
            fh.write(json.dumps(example_record(e, split), sort_keys=True) + "\n")


def read_examples(path) -> List[Example]:
    with open(path, encoding="utf-8") as fh:
        return [example_from_record(json.loads(l)) for l in fh if l.strip()]


def _draw(g: Grammar, rng, cfg: DatasetConfig, count: int, seen: set, accept, what: str, domain: str):
    out = []
    attempts = 0
    limit = max(1000, cfg.attempts_per_example * count)
    while len(out) < count:
        attempts += 1
        if attempts > limit:
            raise InsufficientNovelExamples(
                f"{domain}: only {len(out)} of {count} {what} examples after {limit} draws")
        e = make_example(g, sample_derivation(g, rng, cfg.max_depth), domain)
        if e.depth < cfg.min_depth or e.key in seen:
            continue
        if not accept(e):
            continue
        if cfg.unambiguous and is_ambiguous(g, e):
            continue
        seen.add(e.key)
        out.append(e)
    return out


def _halves(items, rng):
    items = list(items)
    rng.shuffle(items)
    mid = (len(items) + 1) // 2
    return items[:mid], items[mid:]


def build_dataset(g_old: Grammar, g_new: Grammar, cfg: Optional[DatasetConfig] = None) -> DatasetBundle:
    cfg = cfg or DatasetConfig()
    clash = set(g_old.by_id) & set(g_new.by_id)
    if clash:
        raise ValueError(f"new rules reuse old rule ids: {sorted(clash)}")
    domain = g_old.name
    union = g_old.extend(g_new)
    new_ids = set(g_new.by_id)
    m_old = build_memory(g_old, memory_pool(g_old, unambiguous=cfg.unambiguous))
    m_new_prime = build_memory(g_new, memory_pool(union, rules=g_new.rules, unambiguous=cfg.unambiguous)) \
        if new_ids else []
    m_old = [(rid, _retag(e, domain)) for rid, e in m_old]
    m_new_prime = [(rid, _retag(e, domain)) for rid, e in m_new_prime]
    rng = random.Random(cfg.seed)
    # memory exemplars never reappear as training or evaluation pairs
    seen: set = {e.key for _, e in m_old + m_new_prime}
    d_old = _draw(g_old, rng, cfg, cfg.d_old, seen, lambda e: True, "D_old", domain)
    e_old = _draw(g_old, rng, cfg, cfg.e_old, seen, lambda e: True, "E_old", domain)
    if new_ids:
        e_new = _draw(union, rng, cfg, cfg.e_new, seen,
                      lambda e: bool(new_ids & set(e.derivation.rules_used())) and not contains(g_old, e),
                      "E_new", domain)
    else:
        e_new = []
    e_old_dev, e_old_test = _halves(e_old, rng)
    e_new_dev, e_new_test = _halves(e_new, rng)
    return DatasetBundle(domain, d_old, m_old, m_new_prime, e_old_dev, e_old_test, e_new_dev, e_new_test)


def _retag(e: Example, domain: str) -> Example:
    if e.domain == domain:
        return e
    return Example(e.utterance, e.logical_form, domain, e.depth, e.derivation)
