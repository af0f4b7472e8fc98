"""Logical forms as s-expressions.

A logical form is either a ``Leaf`` holding a predicate symbol or a ``Node``
with a head symbol and one or more children.  Trees are immutable; every
editing function returns a fresh tree.  Nodes are addressed by *paths*, the
tuple of child indices leading from the root (``()`` is the root itself).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterator, List, Tuple, Union

Path = Tuple[int, ...]

LPAREN = "("
RPAREN = ")"


class MalformedExpression(ValueError):
    pass


class NodeNotFound(KeyError):
    pass


def _check_symbol(name):
    if not isinstance(name, str) or not name:
        raise MalformedExpression(f"empty symbol: {name!r}")
    if any(ch.isspace() or ch in "()" for ch in name):
        raise MalformedExpression(f"illegal character in symbol {name!r}")


@dataclass(frozen=True)
class Leaf:
    symbol: str

    def __post_init__(self):
        _check_symbol(self.symbol)

    @property
    def head(self) -> str:
        return self.symbol

    @property
    def children(self) -> tuple:
        return ()

    def __str__(self):
        return self.symbol


@dataclass(frozen=True)
class Node:
    head: str
    children: Tuple["LogicalForm", ...]

    def __post_init__(self):
        _check_symbol(self.head)
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise MalformedExpression(f"node {self.head!r} has no children")

    def __str__(self):
        return render_sexpr(self)


LogicalForm = Union[Leaf, Node]


def is_leaf(lf) -> bool:
    return isinstance(lf, Leaf)


def arity(lf) -> int:
    return len(lf.children)


# -- parsing / rendering -----------------------------------------------------

def _lex(text: str) -> List[str]:
    out = []
    buf = []
    for ch in text:
        if ch in "()":
            if buf:
                out.append("".join(buf))
                buf = []
            out.append(ch)
        elif ch.isspace():
            if buf:
                out.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


def parse_tokens(tokens) -> LogicalForm:
    """Build a tree from a token list such as ``tokenize_lf`` produces."""
    tokens = list(tokens)
    if not tokens:
        raise MalformedExpression("empty expression")
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise MalformedExpression("unexpected end of expression")
        tok = tokens[pos]
        pos += 1
        if tok == RPAREN:
            raise MalformedExpression(f"unbalanced ')' at token {pos}")
        if tok != LPAREN:
            return Leaf(tok)
        if pos >= len(tokens) or tokens[pos] in (LPAREN, RPAREN):
            raise MalformedExpression(f"node without a head symbol at token {pos}")
        head = tokens[pos]
        pos += 1
        kids = []
        while True:
            if pos >= len(tokens):
                raise MalformedExpression("unbalanced '(': missing ')'")
            if tokens[pos] == RPAREN:
                pos += 1
                break
            kids.append(read())
        if not kids:
            raise MalformedExpression(f"empty node ({head})")
        return Node(head, tuple(kids))

    tree = read()
    if pos != len(tokens):
        raise MalformedExpression(f"stray tokens after expression: {tokens[pos:]}")
    return tree


def parse_sexpr(text: str) -> LogicalForm:
    return parse_tokens(_lex(text))


def render_sexpr(lf: LogicalForm) -> str:
    if isinstance(lf, Leaf):
        return lf.symbol
    return "(" + " ".join([lf.head] + [render_sexpr(c) for c in lf.children]) + ")"


# -- token spans ---------------------------------------------------------------

@dataclass(frozen=True)
class TokenSpan:
    tokens: Tuple[str, ...]
    # path -> (first, last), 1-based inclusive
    node_spans: Dict[Path, Tuple[int, int]]

    def span(self, path: Path = ()) -> range:
        first, last = self.node_spans[path]
        return range(first, last + 1)

    def head_index(self, path: Path) -> int:
        """1-based index of the head predicate token of the node at ``path``."""
        first, last = self.node_spans[path]
        return first if first == last else first + 1

    def __len__(self):
        return len(self.tokens)


def tokenize_lf(lf: LogicalForm) -> TokenSpan:
    tokens: List[str] = []
    spans: Dict[Path, Tuple[int, int]] = {}

    def walk(node, path):
        start = len(tokens) + 1
        if isinstance(node, Leaf):
            tokens.append(node.symbol)
        else:
            tokens.append(LPAREN)
            tokens.append(node.head)
            for i, child in enumerate(node.children):
                walk(child, path + (i,))
            tokens.append(RPAREN)
        spans[path] = (start, len(tokens))

    walk(lf, ())
    return TokenSpan(tuple(tokens), spans)


# -- structure ----------------------------------------------------------------

def lf_equal(a: LogicalForm, b: LogicalForm) -> bool:
    return a == b


def depth(lf: LogicalForm) -> int:
    if isinstance(lf, Leaf):
        return 1
    return 1 + max(depth(c) for c in lf.children)


def subtree(root: LogicalForm, path: Path) -> LogicalForm:
    node = root
    for k, i in enumerate(path):
        if isinstance(node, Leaf) or i < 0 or i >= len(node.children):
            raise NodeNotFound(path[: k + 1])
        node = node.children[i]
    return node


def has_path(root: LogicalForm, path: Path) -> bool:
    try:
        subtree(root, path)
    except NodeNotFound:
        return False
    return True


def replace_subtree(root: LogicalForm, at: Path, with_: LogicalForm) -> LogicalForm:
    if not at:
        return with_
    if isinstance(root, Leaf) or not 0 <= at[0] < len(root.children):
        raise NodeNotFound(at)
    i = at[0]
    try:
        new_child = replace_subtree(root.children[i], at[1:], with_)
    except NodeNotFound:
        raise NodeNotFound(at) from None
    kids = root.children[:i] + (new_child,) + root.children[i + 1:]
    return Node(root.head, kids)


def iter_paths(lf: LogicalForm, prefix: Path = ()) -> Iterator[Path]:
    """Pre-order paths of every node."""
    yield prefix
    for i, child in enumerate(lf.children):
        yield from iter_paths(child, prefix + (i,))


def leaves(lf: LogicalForm) -> List[str]:
    if isinstance(lf, Leaf):
        return [lf.symbol]
    return [s for c in lf.children for s in leaves(c)]


def predicates(lf: LogicalForm) -> List[str]:
    """All symbols of the tree, heads included, in token order."""
    return [t for t in tokenize_lf(lf).tokens if t not in (LPAREN, RPAREN)]
