"""Grammars shipped with the package."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources
from typing import Dict, Tuple

from .grammar import Grammar, load_domain, load_grammar

DOMAINS = ("person", "restaurant", "event", "course", "animal", "vehicle")


def grammar_text(name: str) -> str:
    return resources.files(__package__).joinpath("grammars", f"{name}.scfg").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load_builtin(name: str) -> Tuple[Grammar, Grammar]:
    if name not in DOMAINS:
        raise KeyError(f"unknown domain {name!r}; choose from {', '.join(DOMAINS)}")
    return load_domain(grammar_text(name), name)


def builtin_grammars() -> Dict[str, Tuple[Grammar, Grammar]]:
    """Domain name -> (G, G') for the six built-in domains."""
    return {name: load_builtin(name) for name in DOMAINS}


@lru_cache(maxsize=None)
def sample_grammar() -> Grammar:
    """The small person grammar: two field phrasings, four people, three relations."""
    return load_grammar(grammar_text("sample_person"))
