"""Arity-typed expression trees and preorder sequence operations.

Trees are immutable after construction: every editing operation returns a
new tree and leaves its inputs untouched, so all functions here are safe to
call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import OutOfRange, RepairImpossible
from .vocab import BINARY, CONSTANT, CONST_SYMBOL, TOK, VARIABLE, Token, const, var_index

TokenSeq = tuple[Token, ...]

DEFAULT_MAX_NODES = 60
COMPLEXITY_STUDY_MAX_NODES = 80


class Node:
    __slots__ = ("token", "children")

    def __init__(self, token: Token, children: tuple["Node", ...] = ()):
        if len(children) != token.arity:
            raise ValueError(f"{token.symbol} expects {token.arity} children, got {len(children)}")
        if token.is_special:
            raise ValueError("special tokens cannot appear in a tree")
        self.token = token
        self.children = children


@dataclass(frozen=True)
class ExprTree:
    root: Node
    node_count: int

    @staticmethod
    def from_root(root: Node) -> "ExprTree":
        return ExprTree(root, _count(root))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExprTree):
            return NotImplemented
        return self.node_count == other.node_count and linearize(self) == linearize(other)

    def __hash__(self) -> int:
        return hash(linearize(self))

    def __repr__(self) -> str:
        return f"ExprTree({format_expr(self)})"


def _count(node: Node) -> int:
    total = 1
    for child in node.children:
        total += _count(child)
    return total


def tree(token: Token, *children: Node) -> Node:
    return Node(token, tuple(children))


def leaf(token: Token) -> Node:
    return Node(token, ())


def linearize(t: ExprTree) -> TokenSeq:
    """Depth-first, root-first token sequence of the tree."""
    out: list[Token] = []
    stack = [t.root]
    while stack:
        node = stack.pop()
        out.append(node.token)
        stack.extend(reversed(node.children))
    return tuple(out)


def decode(seq: Sequence[Token]) -> ExprTree:
    """Rebuild a tree from a preorder sequence, repairing invalid input.

    Repair policy: special tokens are dropped, a left-to-right arity-budget
    scan truncates tokens once the budget reaches zero, and unfilled arity
    at the end is padded with x1 leaves.
    """
    tokens = [t for t in seq if not t.is_special]
    if not tokens:
        raise RepairImpossible("no usable tokens in sequence")
    kept: list[Token] = []
    budget = 1
    for tok in tokens:
        if budget == 0:
            break
        kept.append(tok)
        budget += tok.arity - 1
    x1 = TOK["x1"]
    kept.extend([x1] * budget)

    pos = 0

    def build() -> Node:
        nonlocal pos
        tok = kept[pos]
        pos += 1
        children = tuple(build() for _ in range(tok.arity))
        return Node(tok, children)

    root = build()
    return ExprTree(root, len(kept))


def mask(seq: Sequence[Token], positions: Iterable[int]) -> TokenSeq:
    """Replace tokens at `positions` with the mask marker."""
    seq = tuple(seq)
    positions = set(positions)
    for p in positions:
        if not 0 <= p < len(seq):
            raise OutOfRange(f"mask position {p} outside sequence of length {len(seq)}")
        if seq[p].kind == "sep":
            raise OutOfRange("mask positions must not target the separator")
    return tuple(TOK["[MASK]"] if i in positions else t for i, t in enumerate(seq))


def subtree_span(seq: Sequence[Token], root_index: int) -> tuple[int, int]:
    """Half-open range of the subtree rooted at `root_index` in a valid preorder."""
    if not 0 <= root_index < len(seq):
        raise OutOfRange(f"root index {root_index} outside sequence of length {len(seq)}")
    budget = 1
    j = root_index
    while budget > 0:
        if j >= len(seq):
            raise OutOfRange("sequence is not a valid preorder encoding")
        budget += seq[j].arity - 1
        j += 1
    return root_index, j


@dataclass(frozen=True)
class SwapResult:
    first: ExprTree
    second: ExprTree
    first_rejected: bool = False
    second_rejected: bool = False


def swap_subtrees(a: ExprTree, i: int, b: ExprTree, j: int,
                  max_nodes: int | None = None) -> SwapResult:
    """Exchange the subtrees rooted at preorder indices i and j.

    An offspring larger than `max_nodes` is rejected and replaced by its
    parent, with the rejection flagged.
    """
    sub_a = _node_at(a, i)
    sub_b = _node_at(b, j)
    first = ExprTree.from_root(_replace_at(a.root, i, sub_b))
    second = ExprTree.from_root(_replace_at(b.root, j, sub_a))
    first_rej = max_nodes is not None and first.node_count > max_nodes
    second_rej = max_nodes is not None and second.node_count > max_nodes
    return SwapResult(
        a if first_rej else first,
        b if second_rej else second,
        first_rej,
        second_rej,
    )


def _node_at(t: ExprTree, index: int) -> Node:
    if not 0 <= index < t.node_count:
        raise OutOfRange(f"index {index} outside tree of {t.node_count} nodes")
    pos = 0
    stack = [t.root]
    while stack:
        node = stack.pop()
        if pos == index:
            return node
        pos += 1
        stack.extend(reversed(node.children))
    raise OutOfRange(f"index {index} not reached")  # pragma: no cover


def _replace_at(node: Node, index: int, replacement: Node) -> Node:
    counter = [0]

    def walk(n: Node) -> Node:
        here = counter[0]
        counter[0] += 1
        if here == index:
            _skip(n, counter)
            return replacement
        new_children = tuple(walk(c) for c in n.children)
        return Node(n.token, new_children)

    def _skip(n: Node, counter_: list[int]) -> None:
        for c in n.children:
            counter_[0] += 1
            _skip(c, counter_)

    return walk(node)


def node_tokens(t: ExprTree) -> TokenSeq:
    return linearize(t)


def constant_positions(t: ExprTree) -> list[int]:
    """Preorder indices of constant nodes."""
    return [i for i, tok in enumerate(linearize(t)) if tok.kind == CONSTANT]


def constant_values(t: ExprTree) -> list[float]:
    return [tok.value if tok.value is not None else 1.0
            for tok in linearize(t) if tok.kind == CONSTANT]


def with_constants(t: ExprTree, values: Sequence[float]) -> ExprTree:
    """Copy of the tree with constant nodes set to `values`, in preorder order."""
    values = list(values)
    expected = len(constant_positions(t))
    if len(values) != expected:
        raise OutOfRange(f"expected {expected} constant values, got {len(values)}")
    it = iter(values)

    def walk(n: Node) -> Node:
        if n.token.kind == CONSTANT:
            return Node(const(next(it)), ())
        return Node(n.token, tuple(walk(c) for c in n.children))

    return ExprTree(walk(t.root), t.node_count)


def variables_used(t: ExprTree) -> set[int]:
    return {var_index(tok) for tok in linearize(t) if tok.kind == VARIABLE}


# --- simplification -------------------------------------------------------

from . import protected  # noqa: E402  (scalar protected arithmetic for folding)


def simplify(t: ExprTree) -> ExprTree:
    """Apply the safe local rewrite rules bottom-up.

    Rules: fold fully-constant subtrees, strip additive/multiplicative
    identities (x+0, x*1, x*0 and mirrored forms, x-0), and collapse double
    negation written through sub. Division and trigonometric rewrites are
    deliberately excluded.
    """
    return ExprTree.from_root(_simplify_node(t.root))


def _const_value(n: Node) -> float | None:
    if n.token.kind == CONSTANT:
        return n.token.value if n.token.value is not None else 1.0
    return None


def _is_zero(n: Node) -> bool:
    v = _const_value(n)
    return v is not None and v == 0.0


def _is_one(n: Node) -> bool:
    v = _const_value(n)
    return v is not None and v == 1.0


def _simplify_node(n: Node) -> Node:
    children = tuple(_simplify_node(c) for c in n.children)
    tok = n.token
    if tok.is_operator and all(_const_value(c) is not None for c in children):
        vals = [_const_value(c) for c in children]
        folded = protected.apply_scalar(tok.symbol, vals)
        return Node(const(folded), ())
    if tok.kind == BINARY:
        a, b = children
        if tok.symbol == "add":
            if _is_zero(b):
                return a
            if _is_zero(a):
                return b
        elif tok.symbol == "sub":
            if _is_zero(b):
                return a
            # double negation: 0 - (0 - x) -> x
            if _is_zero(a) and b.token.symbol == "sub" and _is_zero(b.children[0]):
                return b.children[1]
        elif tok.symbol == "mul":
            if _is_one(b):
                return a
            if _is_one(a):
                return b
            if _is_zero(a) or _is_zero(b):
                return Node(const(0.0), ())
    return Node(tok, children)


# --- textual format -------------------------------------------------------

def format_expr(t: ExprTree) -> str:
    """Prefix S-expression, e.g. ``(add x1 (sin x1))``; exact round trip."""

    def fmt(n: Node) -> str:
        tok = n.token
        if tok.kind == CONSTANT:
            if tok.value is None:
                return CONST_SYMBOL
            return f"(const {tok.value!r})"
        if not n.children:
            return tok.symbol
        inner = " ".join(fmt(c) for c in n.children)
        return f"({tok.symbol} {inner})"

    return fmt(t.root)


def parse_expr(text: str) -> ExprTree:
    """Parse the textual S-expression format produced by `format_expr`."""
    toks = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse() -> Node:
        nonlocal pos
        if pos >= len(toks):
            raise ValueError("unexpected end of expression")
        t = toks[pos]
        pos += 1
        if t == "(":
            head = toks[pos]
            pos += 1
            if head == "const":
                value = float(toks[pos])
                pos += 1
                _expect(")")
                return Node(const(value), ())
            if head not in TOK or not TOK[head].is_operator:
                raise ValueError(f"unknown operator {head!r}")
            children = []
            while toks[pos] != ")":
                children.append(parse())
            _expect(")")
            return Node(TOK[head], tuple(children))
        if t == ")":
            raise ValueError("unbalanced parenthesis")
        if t == CONST_SYMBOL:
            return Node(TOK[CONST_SYMBOL], ())
        if t in TOK and TOK[t].kind == VARIABLE:
            return Node(TOK[t], ())
        try:
            return Node(const(float(t)), ())
        except ValueError:
            raise ValueError(f"unknown token {t!r}") from None

    def _expect(sym: str) -> None:
        nonlocal pos
        if pos >= len(toks) or toks[pos] != sym:
            raise ValueError(f"expected {sym!r}")
        pos += 1

    root = parse()
    if pos != len(toks):
        raise ValueError("trailing tokens after expression")
    return ExprTree.from_root(root)
