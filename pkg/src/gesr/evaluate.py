"""Expression evaluation and fitness metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import protected
from .errors import LengthMismatch, UnboundVariable
from .tree import ExprTree, simplify
from .vocab import CONSTANT, VARIABLE

SENTINEL = float("-inf")

# Instruction opcodes: ("var", col), ("const", value), ("slot", i), ("op", symbol)


def compile_tree(t: ExprTree, const_slots: bool = False) -> list[tuple]:
    """Postorder instruction list; with `const_slots`, constants become
    parameter reads in preorder order."""
    instrs: list[tuple] = []
    slot = [0]

    def walk(node) -> None:
        tok = node.token
        if tok.kind == CONSTANT and const_slots:
            instrs_pre.append(("slot", slot[0]))
            slot[0] += 1
            return
        if tok.kind == CONSTANT:
            instrs_pre.append(("const", tok.value if tok.value is not None else 1.0))
            return
        if tok.kind == VARIABLE:
            instrs_pre.append(("var", int(tok.symbol[1:]) - 1))
            return
        instrs_pre.append(("op", tok.symbol, tok.arity))
        for c in node.children:
            walk(c)

    # Emit preorder with explicit op arity, then convert to postorder by a
    # simple recursive pass; preorder slot order keeps constants aligned with
    # `constant_positions`.
    instrs_pre: list[tuple] = []
    walk(t.root)

    pos = [0]

    def to_post() -> None:
        ins = instrs_pre[pos[0]]
        pos[0] += 1
        if ins[0] == "op":
            for _ in range(ins[2]):
                to_post()
        instrs.append(ins)

    to_post()
    return instrs


def run_program(instrs: Sequence[tuple], X: np.ndarray,
                theta: Sequence[float] | None = None,
                ops: dict | None = None) -> np.ndarray:
    if ops is None:
        ops = protected.VECTOR_OPS
    stack: list = []
    for ins in instrs:
        kind = ins[0]
        if kind == "var":
            stack.append(X[:, ins[1]])
        elif kind == "const":
            stack.append(ins[1])
        elif kind == "slot":
            stack.append(theta[ins[1]])
        else:
            sym, arity = ins[1], ins[2]
            if arity == 2:
                b = stack.pop()
                a = stack.pop()
                stack.append(ops[sym](a, b))
            else:
                stack.append(ops[sym](stack.pop()))
    out = stack[0]
    if np.ndim(out) == 0:
        out = np.full(X.shape[0], float(out))
    return np.asarray(out, dtype=float)


def eval_tree(t: ExprTree, X: np.ndarray) -> np.ndarray:
    """Row-wise protected evaluation; output is always finite."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    needed = max((int(tok.symbol[1:]) for tok in _var_tokens(t)), default=0)
    if needed > X.shape[1]:
        raise UnboundVariable(f"tree uses x{needed} but X has {X.shape[1]} columns")
    return run_program(compile_tree(t), X)


def eval_tree_raw(t: ExprTree, X: np.ndarray) -> np.ndarray:
    """Unprotected evaluation; NaN/inf rows mark domain violations."""
    X = np.asarray(X, dtype=float)
    with np.errstate(all="ignore"):
        return run_program(compile_tree(t), X, ops=protected.raw_eval_ops())


def _var_tokens(t: ExprTree):
    from .tree import linearize
    return [tok for tok in linearize(t) if tok.kind == VARIABLE]


def compile_scalar_fn(t: ExprTree, dims: int):
    """Compile to a plain-Python function of `dims` floats (fast ODE use)."""

    def emit(node) -> str:
        tok = node.token
        if tok.kind == VARIABLE:
            return tok.symbol
        if tok.kind == CONSTANT:
            return repr(tok.value if tok.value is not None else 1.0)
        args = ", ".join(emit(c) for c in node.children)
        return f"_p.{tok.symbol}({args})"

    params = ", ".join(f"x{i + 1}" for i in range(dims))
    src = f"lambda {params}: {emit(t.root)}"
    return eval(src, {"_p": protected})


# --- metrics ----------------------------------------------------------------

def r_squared(y: np.ndarray, yhat: np.ndarray) -> float:
    """Coefficient of determination; -inf sentinel when y is constant and not
    matched exactly."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise LengthMismatch(f"shape mismatch {y.shape} vs {yhat.shape}")
    if y.size < 2:
        raise LengthMismatch("need at least two samples")
    with np.errstate(all="ignore"):
        ss_res = float(np.sum((y - yhat) ** 2))
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else SENTINEL
    r2 = 1.0 - ss_res / ss_tot
    return r2 if math.isfinite(r2) else SENTINEL


def mse(y: np.ndarray, yhat: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise LengthMismatch(f"shape mismatch {y.shape} vs {yhat.shape}")
    with np.errstate(all="ignore"):
        return float(np.mean((y - yhat) ** 2))


@dataclass(frozen=True)
class Fitness:
    r2: float
    mse: float
    nodes: int

    @property
    def valid(self) -> bool:
        return math.isfinite(self.r2)


def fitness(t: ExprTree, ds) -> Fitness:
    """R²/MSE/node-count of a tree on a dataset (no constant refitting)."""
    yhat = eval_tree(t, ds.X)
    m = mse(ds.y, yhat)
    if not math.isfinite(m):
        return Fitness(SENTINEL, float("inf"), t.node_count)
    return Fitness(r_squared(ds.y, yhat), m, t.node_count)


# --- recovery ---------------------------------------------------------------

RECOVERY_R2 = 1.0 - 1e-12
CONST_MATCH_TOL = 1e-3
DENSE_FACTOR = 10
DENSE_SEED_OFFSET = 100003


def structurally_equal(a: ExprTree, b: ExprTree) -> bool:
    """Symbol-identical trees; constant values must agree to 1e-3 relative."""

    def eq(na, nb) -> bool:
        ta, tb = na.token, nb.token
        if ta.kind != tb.kind:
            return False
        if ta.kind == CONSTANT:
            va = ta.value if ta.value is not None else 1.0
            vb = tb.value if tb.value is not None else 1.0
            return math.isclose(va, vb, rel_tol=CONST_MATCH_TOL, abs_tol=CONST_MATCH_TOL)
        if ta.symbol != tb.symbol:
            return False
        return all(eq(ca, cb) for ca, cb in zip(na.children, nb.children))

    return a.node_count == b.node_count and eq(a.root, b.root)


def is_recovered(pred: ExprTree, truth: ExprTree, ds) -> bool:
    """Exact-recovery check: structural identity after simplification, or
    near-perfect fit on a fresh sample 10x denser than the task domain."""
    if structurally_equal(simplify(pred), simplify(truth)):
        return True
    from .datasets import dense_resample
    X = dense_resample(ds, DENSE_FACTOR, DENSE_SEED_OFFSET)
    y_true = eval_tree(truth, X)
    yhat = eval_tree(pred, X)
    return r_squared(y_true, yhat) >= RECOVERY_R2
