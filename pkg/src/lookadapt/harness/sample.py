"""The small person grammar: its training set, its memories, and gold examples."""
from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

from ..model import Memory
from ..scfg import (Example, Grammar, build_memory, enumerate_domain, is_ambiguous, make_example,
                    memory_pool, parse_source, sample_grammar, tokenize_utterance)
from ..sexpr import LogicalForm

# (rule id, utterance) of the three-entry memory used by traces
TRACE_MEMORY = (("g1", "Mary 's friends"), ("g8", "parents"), ("g3", "John"))


class NoDerivation(ValueError):
    pass


def gold_example(words: Sequence[str], g: Optional[Grammar] = None,
                 category: Optional[str] = None) -> Example:
    """The grammar's analysis of ``words``; the first derivation wins if there are several."""
    g = g or sample_grammar()
    derivs = parse_source(g, tuple(words), category)
    if not derivs:
        raise NoDerivation(f"the grammar does not derive {' '.join(words)!r}")
    return make_example(g, derivs[0])


def sample_memory() -> Memory:
    """One exemplar per rule of the small grammar (the shallowest, shortest one)."""
    g = sample_grammar()
    return Memory(build_memory(g, memory_pool(g)))


def trace_memory() -> Memory:
    g = sample_grammar()
    items = []
    for rule_id, text in TRACE_MEMORY:
        category = g.by_id[rule_id].lhs
        items.append((rule_id, gold_example(tokenize_utterance(text), g, category)))
    return Memory(items)


def sample_examples(max_depth: int = 3, limit: int = 200) -> List[Example]:
    """Every unambiguous pair of the small grammar up to ``max_depth`` (at most ``limit``)."""
    g = sample_grammar()
    out = [e for e in enumerate_domain(g, max_depth) if not is_ambiguous(g, e)]
    return out[:limit]
