"""Protected (totalized) arithmetic used everywhere expressions are evaluated.

Rules:
  div(a, b): denominator replaced by sign(b) * max(|b|, 1e-9), sign(0) = +1
  log(x)   : log(max(|x|, 1e-9))
  sqrt(x)  : sqrt(|x|)
  exp(x)   : exp(min(x, 40))
and every operator output is clamped to [-1e150, 1e150] so that no chain of
operations can overflow to infinity. Inside the safe domain (|denominator|
and |log argument| >= 1e-9, exponent <= 40, magnitudes <= 1e150) every rule
is exact, which keeps sampled benchmark targets bit-identical to their
unprotected values.
"""

from __future__ import annotations

import math

import numpy as np

EPS = 1e-9
EXP_MAX = 40.0
CLIP = 1e150


# --- scalar versions (plain floats; used for constant folding and ODE rhs) --

def _clip(v: float) -> float:
    if v > CLIP:
        return CLIP
    if v < -CLIP:
        return -CLIP
    return v


def add(a: float, b: float) -> float:
    return _clip(a + b)


def sub(a: float, b: float) -> float:
    return _clip(a - b)


def mul(a: float, b: float) -> float:
    return _clip(a * b)


def div(a: float, b: float) -> float:
    if abs(b) < EPS:
        b = EPS if b >= 0 else -EPS
    return _clip(a / b)


def sin(x: float) -> float:
    return math.sin(x)


def cos(x: float) -> float:
    return math.cos(x)


def exp(x: float) -> float:
    return _clip(math.exp(min(x, EXP_MAX)))


def log(x: float) -> float:
    return math.log(max(abs(x), EPS))


def sqrt(x: float) -> float:
    return _clip(math.sqrt(abs(x)))


SCALAR_OPS = {
    "add": add, "sub": sub, "mul": mul, "div": div,
    "sin": sin, "cos": cos, "exp": exp, "log": log, "sqrt": sqrt,
}


def apply_scalar(symbol: str, args) -> float:
    return SCALAR_OPS[symbol](*args)


# --- vectorized versions (numpy arrays) -------------------------------------

def vclip(v: np.ndarray) -> np.ndarray:
    return np.clip(v, -CLIP, CLIP)


def vadd(a, b):
    return vclip(a + b)


def vsub(a, b):
    return vclip(a - b)


def vmul(a, b):
    return vclip(a * b)


def vdiv(a, b):
    b = np.asarray(b, dtype=float)
    denom = np.where(np.abs(b) < EPS, np.where(b < 0, -EPS, EPS), b)
    return vclip(a / denom)


def vsin(x):
    return np.sin(x)


def vcos(x):
    return np.cos(x)


def vexp(x):
    return vclip(np.exp(np.minimum(x, EXP_MAX)))


def vlog(x):
    return np.log(np.maximum(np.abs(x), EPS))


def vsqrt(x):
    return vclip(np.sqrt(np.abs(x)))


VECTOR_OPS = {
    "add": vadd, "sub": vsub, "mul": vmul, "div": vdiv,
    "sin": vsin, "cos": vcos, "exp": vexp, "log": vlog, "sqrt": vsqrt,
}


# --- raw (unprotected) versions, used only to detect domain violations ------

def raw_eval_ops():
    """Unprotected numpy ops; non-finite output marks an invalid input row."""
    with np.errstate(all="ignore"):
        pass
    return {
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "mul": lambda a, b: a * b,
        "div": lambda a, b: a / b,
        "sin": np.sin,
        "cos": np.cos,
        "exp": np.exp,
        "log": np.log,
        "sqrt": np.sqrt,
    }
