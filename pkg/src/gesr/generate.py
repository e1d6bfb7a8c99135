"""Random expression generation (grow method) and mutation-node selection."""

from __future__ import annotations

import numpy as np

from .tree import ExprTree, Node, linearize, decode
from .vocab import BINARY_OPS, CONSTANT, TOK, UNARY_OPS, VARIABLE, const, var

OP_PROB = 0.5
OP_PROB_DECAY = 0.85
CONST_LEAF_PROB = 0.2
CONST_RANGE = 5.0


def random_tree(rng: np.random.Generator, max_nodes: int, dims: int,
                const_leaf_prob: float = CONST_LEAF_PROB) -> ExprTree:
    """Grow a random valid tree of at most `max_nodes` nodes containing at
    least one variable. Operator probability 0.5 decays with depth."""

    def grow(budget: int, depth: int) -> Node:
        p_op = OP_PROB * (OP_PROB_DECAY ** depth)
        if budget >= 2 and rng.random() < p_op:
            if budget >= 3 and rng.random() < 0.5:
                sym = BINARY_OPS[rng.integers(len(BINARY_OPS))]
                left_budget = 1 + int(rng.integers(budget - 2))
                left = grow(left_budget, depth + 1)
                right = grow(budget - 1 - _size(left), depth + 1)
                return Node(TOK[sym], (left, right))
            sym = UNARY_OPS[rng.integers(len(UNARY_OPS))]
            return Node(TOK[sym], (grow(budget - 1, depth + 1),))
        if rng.random() < const_leaf_prob:
            return Node(const(float(rng.uniform(-CONST_RANGE, CONST_RANGE))), ())
        return Node(var(int(rng.integers(dims)) + 1), ())

    def _size(n: Node) -> int:
        return 1 + sum(_size(c) for c in n.children)

    t = ExprTree.from_root(grow(max_nodes, 0))
    tokens = linearize(t)
    if not any(tok.kind == VARIABLE for tok in tokens):
        leaves = [i for i, tok in enumerate(tokens) if tok.arity == 0]
        pick = leaves[int(rng.integers(len(leaves)))]
        patched = list(tokens)
        patched[pick] = var(int(rng.integers(dims)) + 1)
        t = decode(patched)
    return t


def select_mutation_nodes(t: ExprTree, rng: np.random.Generator,
                          rate: float = 0.1, cap: int = 4) -> list[int]:
    """Pick m = 1 + Binomial(node_count - 1, rate) operator/variable node
    indices uniformly, capped at `cap`."""
    tokens = linearize(t)
    eligible = [i for i, tok in enumerate(tokens) if tok.kind != CONSTANT]
    if not eligible:
        return []
    m = 1 + int(rng.binomial(max(t.node_count - 1, 0), rate))
    m = min(m, cap, len(eligible))
    picks = rng.choice(len(eligible), size=m, replace=False)
    return sorted(eligible[int(i)] for i in picks)
