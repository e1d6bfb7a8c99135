"""Differentiable mutation: softmax mixtures over candidate operators or
variables at selected tree nodes, optimized jointly with the constants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import protected
from .bfgs import OptConfig, minimize, optimize_constants
from .errors import NonFiniteObjective, OutOfRange, UnsupportedNode
from .evaluate import Fitness, fitness
from .tree import ExprTree, Node, linearize, simplify
from .vocab import BINARY, BINARY_OPS, CONSTANT, TOK, UNARY, UNARY_OPS, VARIABLE, const

PASSTHROUGH = "passthrough"
UNARY_CANDIDATES = UNARY_OPS + (PASSTHROUGH,)
BINARY_CANDIDATES = BINARY_OPS
INCUMBENT_LOGIT = 2.0


@dataclass(frozen=True)
class RelaxSlot:
    location: int  # preorder node index in the base tree
    kind: str      # "unary" | "binary" | "variable"
    candidates: tuple[str, ...]
    start: int     # offset of this slot's logits in theta


@dataclass(frozen=True)
class RelaxedExpr:
    base: ExprTree
    slots: tuple[RelaxSlot, ...]
    dims: int
    theta0: np.ndarray  # slot logits followed by the base constants
    n_logits: int


def relax_nodes(t: ExprTree, nodes, dims: int) -> RelaxedExpr:
    """Turn the selected operator/variable nodes into softmax mixture slots.

    Logits start at 2.0 for the incumbent symbol and 0 elsewhere, biasing the
    relaxed search toward the parent expression.
    """
    tokens = linearize(t)
    locations = sorted(set(int(i) for i in nodes))
    slots: list[RelaxSlot] = []
    logits: list[float] = []
    offset = 0
    for loc in locations:
        if not 0 <= loc < len(tokens):
            raise OutOfRange(f"node index {loc} outside tree of {len(tokens)} nodes")
        tok = tokens[loc]
        if tok.kind == UNARY:
            cands = UNARY_CANDIDATES
            incumbent = UNARY_OPS.index(tok.symbol)
        elif tok.kind == BINARY:
            cands = BINARY_CANDIDATES
            incumbent = BINARY_OPS.index(tok.symbol)
        elif tok.kind == VARIABLE:
            cands = tuple(f"x{k}" for k in range(1, dims + 1))
            k = int(tok.symbol[1:])
            incumbent = k - 1 if k <= dims else None
        else:
            raise UnsupportedNode(f"cannot relax a {tok.kind} node")
        slot_logits = [0.0] * len(cands)
        if incumbent is not None:
            slot_logits[incumbent] = INCUMBENT_LOGIT
        slots.append(RelaxSlot(loc, tok.kind, cands, offset))
        logits.extend(slot_logits)
        offset += len(cands)
    consts = [tok.value if tok.value is not None else 1.0
              for tok in tokens if tok.kind == CONSTANT]
    theta0 = np.asarray(logits + consts, dtype=float)
    return RelaxedExpr(t, tuple(slots), dims, theta0, offset)


def _softmax(logits: np.ndarray) -> np.ndarray:
    m = np.max(logits)
    if not np.isfinite(m):
        raise NonFiniteObjective("all candidate logits are -inf")
    e = np.exp(logits - m)
    return e / np.sum(e)


def slot_weights(re: RelaxedExpr, theta) -> list[np.ndarray]:
    theta = np.asarray(theta, dtype=float)
    return [_softmax(theta[s.start:s.start + len(s.candidates)]) for s in re.slots]


def eval_relaxed(re: RelaxedExpr, X: np.ndarray, theta=None) -> np.ndarray:
    """Recursive evaluation where each slot outputs the softmax-weighted sum
    of its candidates; exact-zero weights contribute exactly nothing, so a
    one-hot theta reproduces the discrete evaluation bit for bit."""
    X = np.asarray(X, dtype=float)
    theta = re.theta0 if theta is None else np.asarray(theta, dtype=float)
    slot_at = {s.location: s for s in re.slots}
    weights = {s.location: _softmax(theta[s.start:s.start + len(s.candidates)])
               for s in re.slots}
    ops = protected.VECTOR_OPS
    counter = [0]
    const_idx = [re.n_logits]

    def walk(node: Node):
        here = counter[0]
        counter[0] += 1
        tok = node.token
        if tok.kind == CONSTANT:
            v = theta[const_idx[0]]
            const_idx[0] += 1
            return v
        child_vals = [walk(c) for c in node.children]
        slot = slot_at.get(here)
        if slot is None:
            if tok.kind == VARIABLE:
                return X[:, int(tok.symbol[1:]) - 1]
            return ops[tok.symbol](*child_vals)
        w = weights[here]
        acc = 0.0
        if slot.kind == VARIABLE:
            for k, wk in enumerate(w):
                if wk != 0.0:
                    acc = acc + wk * X[:, k]
            return acc
        for cand, wk in zip(slot.candidates, w):
            if wk == 0.0:
                continue
            if cand == PASSTHROUGH:
                out = child_vals[0]
            else:
                out = ops[cand](*child_vals)
            acc = acc + wk * out
        return acc

    out = walk(re.base.root)
    if np.ndim(out) == 0:
        out = np.full(X.shape[0], float(out))
    return np.asarray(out, dtype=float)


def discretize(re: RelaxedExpr, theta) -> ExprTree:
    """Collapse every slot to its argmax candidate (ties take the lowest
    candidate index), carry constants over, and simplify. With no slots the
    base tree is returned unchanged."""
    theta = np.asarray(theta, dtype=float)
    if not re.slots:
        return re.base
    slot_at = {s.location: s for s in re.slots}
    counter = [0]
    const_idx = [re.n_logits]

    def walk(node: Node) -> Node:
        here = counter[0]
        counter[0] += 1
        tok = node.token
        if tok.kind == CONSTANT:
            v = float(theta[const_idx[0]])
            const_idx[0] += 1
            return Node(const(v), ())
        children = tuple(walk(c) for c in node.children)
        slot = slot_at.get(here)
        if slot is None:
            return Node(tok, children)
        logits = theta[slot.start:slot.start + len(slot.candidates)]
        winner = slot.candidates[int(np.argmax(logits))]
        if winner == PASSTHROUGH:
            return children[0]
        if slot.kind == VARIABLE:
            return Node(TOK[winner], ())
        return Node(TOK[winner], children)

    return simplify(ExprTree.from_root(walk(re.base.root)))


@dataclass(frozen=True)
class RelaxResult:
    tree: ExprTree
    fitness: Fitness
    fell_back: bool  # input returned unchanged (non-finite objective)


def mutate_by_relaxation(t: ExprTree, ds, nodes, cfg: OptConfig = OptConfig()) -> RelaxResult:
    """Relax the selected nodes, optimize logits and constants by BFGS on
    MSE, discretize, then refit constants discretely."""
    nodes = sorted(set(int(i) for i in nodes))
    if not nodes:
        return RelaxResult(t, fitness(t, ds), False)
    re = relax_nodes(t, nodes, ds.dims)
    y = ds.y

    def objective(theta):
        yhat = eval_relaxed(re, ds.X, theta)
        with np.errstate(all="ignore"):
            return float(np.mean((y - yhat) ** 2))

    try:
        theta_star = minimize(objective, re.theta0, cfg)
    except NonFiniteObjective:
        return RelaxResult(t, fitness(t, ds), True)
    cand = discretize(re, theta_star)
    cand, fit = optimize_constants(cand, ds, cfg)
    return RelaxResult(cand, fit, False)
