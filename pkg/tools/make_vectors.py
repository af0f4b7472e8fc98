"""Regenerate the bundled 50-d word-vector file.

Words come from the built-in grammars.  Each vector mixes a category
direction (entity, relation, attribute, value, function word) with a
word-specific direction, so words of the same kind lie near each other;
inflected forms (friends / friend) share a lemma vector plus small noise.
"""
import argparse
import hashlib

import numpy as np

from lookadapt.scfg import builtin_grammars, sample_grammar

DIM = 50


def seeded(name, dim=DIM):
    seed = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")
    return np.random.default_rng(seed).normal(0.0, 1.0 / np.sqrt(dim), dim)


def category_of(lhs):
    if lhs.endswith("REL"):
        return "relation"
    if lhs.endswith("ATTR"):
        return "attribute"
    if lhs.endswith("VAL"):
        return "value"
    return "entity"


def collect():
    words = {}  # word -> (category, lemma)
    grammars = [sample_grammar()]
    for g_old, g_new in builtin_grammars().values():
        grammars += [g_old, g_new]
    for g in grammars:
        for r in g.rules:
            if r.is_lexical and len(r.source) == 1:
                lemma = r.target.head
                cat = category_of(r.lhs)
                words.setdefault(r.source[0].lower(), (cat, lemma))
                words.setdefault(lemma, (cat, lemma))
    for g in grammars:
        for r in g.rules:
            for tok in r.source:
                if isinstance(tok, str):
                    words.setdefault(tok.lower(), ("function", tok.lower()))
            for sym in _symbols(r.target):
                words.setdefault(sym, ("function", sym))
    return words


def _symbols(lf):
    from lookadapt.scfg.grammar import parse_slot
    out = []

    def walk(n):
        if parse_slot(n.head) is None:
            out.append(n.head)
        for c in n.children:
            walk(c)
    walk(lf)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    args = ap.parse_args(argv)
    words = collect()
    with open(args.out, "w", encoding="utf-8") as fh:
        for w in sorted(words):
            cat, lemma = words[w]
            v = 0.6 * seeded("category:" + cat) + 0.8 * seeded("lemma:" + lemma)
            if w != lemma:
                v = v + 0.15 * seeded("form:" + w)
            fh.write(w + " " + " ".join(f"{x:.5f}" for x in v) + "\n")
    print(f"wrote {len(words)} vectors to {args.out}")


if __name__ == "__main__":
    main()
