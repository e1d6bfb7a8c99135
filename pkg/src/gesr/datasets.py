"""Benchmark task registry, dataset sampling, noise injection and summaries.

Expressions are stored in the textual S-expression format and parsed into
canonical target trees. Canonical form conventions: chained sums/products
associate left-deep, integer powers expand to left-deep product chains,
fractional powers use exp/log, tan and tanh expand through sin/cos/exp,
and a printed absolute value |u| is encoded as sqrt(u*u).
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import DomainExhausted
from .evaluate import eval_tree, eval_tree_raw
from .tree import ExprTree, parse_expr

UNIFORM = "U"
EVENLY = "E"


@dataclass(frozen=True)
class SamplingSpec:
    mode: str
    low: float
    high: float
    count: int
    dims: int
    seed: int

    def __post_init__(self):
        if self.mode not in (UNIFORM, EVENLY):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if not self.low < self.high:
            raise ValueError("low must be < high")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 1 <= self.dims <= 10:
            raise ValueError("dims must be in 1..10")


@dataclass(frozen=True)
class BenchmarkTask:
    name: str
    suite: str
    expression: str
    spec: SamplingSpec
    approximate_source: bool = False

    @property
    def target(self) -> ExprTree:
        return _parse_cached(self.expression)


@lru_cache(maxsize=None)
def _parse_cached(expression: str) -> ExprTree:
    return parse_expr(expression)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    task_name: str
    seed: int
    noise_level: float
    spec: SamplingSpec

    @property
    def dims(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]


# --- expression-string builders --------------------------------------------

def C(v: float) -> str:
    return f"(const {float(v)!r})"


def _chain(op: str, terms) -> str:
    terms = list(terms)
    out = terms[0]
    for t in terms[1:]:
        out = f"({op} {out} {t})"
    return out


def A(*ts) -> str:
    return _chain("add", ts)


def S(a: str, b: str) -> str:
    return f"(sub {a} {b})"


def M(*ts) -> str:
    return _chain("mul", ts)


def D(a: str, b: str) -> str:
    return f"(div {a} {b})"


def POW(base: str, n: int) -> str:
    return _chain("mul", [base] * n)


def SIN(t: str) -> str:
    return f"(sin {t})"


def COS(t: str) -> str:
    return f"(cos {t})"


def EXP(t: str) -> str:
    return f"(exp {t})"


def LOG(t: str) -> str:
    return f"(log {t})"


def SQRT(t: str) -> str:
    return f"(sqrt {t})"


def ABS(t: str) -> str:
    return SQRT(M(t, t))


def NEG(t: str) -> str:
    return M(C(-1.0), t)


def TAN(t: str) -> str:
    return D(SIN(t), COS(t))


def TANH(t: str) -> str:
    return D(S(EXP(t), EXP(NEG(t))), A(EXP(t), EXP(NEG(t))))


def POWF(base: str, p: float) -> str:
    """Fractional power via exp(p * log(base))."""
    return EXP(M(C(p), LOG(base)))


_PI = math.pi
_EULER_GAMMA = 0.5772156649015329


def _poly_desc(var: str,*coeff_deg) -> str:
    """Sum of coeff * var**deg terms, listed highest degree first."""
    terms = []
    for coeff, deg in coeff_deg:
        t = POW(var, deg) if deg > 0 else C(1.0)
        if coeff != 1:
            t = M(C(coeff), t) if deg > 0 else C(coeff)
        terms.append(t)
    return A(*terms)


def _power_sum(var: str, hi: int, lo: int = 1) -> str:
    return A(*[POW(var, d) for d in range(hi, lo - 1, -1)])


# --- the task table ---------------------------------------------------------

def _rows() -> list[tuple]:
    x1, x2, x3, x4, x5 = "x1", "x2", "x3", "x4", "x5"
    r: list[tuple] = []

    def t(name, suite, expr, mode, low, high, count, dims, approx=False):
        r.append((name, suite, expr, mode, low, high, count, dims, approx))

    # Nguyen
    t("Nguyen-1", "Nguyen", _power_sum(x1, 3), UNIFORM, -1, 1, 20, 1)
    t("Nguyen-2", "Nguyen", _power_sum(x1, 4), UNIFORM, -1, 1, 20, 1)
    t("Nguyen-3", "Nguyen", _power_sum(x1, 5), UNIFORM, -1, 1, 20, 1)
    t("Nguyen-4", "Nguyen", _power_sum(x1, 6), UNIFORM, -1, 1, 20, 1)
    t("Nguyen-5", "Nguyen", S(M(SIN(M(x1, x1)), COS(x1)), C(1.0)), UNIFORM, -1, 1, 20, 1)
    t("Nguyen-6", "Nguyen", A(SIN(x1), SIN(A(x1, M(x1, x1)))), UNIFORM, -1, 1, 20, 1)
    t("Nguyen-7", "Nguyen", A(LOG(A(x1, C(1.0))), LOG(A(M(x1, x1), C(1.0)))), UNIFORM, 0, 2, 20, 1)
    t("Nguyen-8", "Nguyen", SQRT(x1), UNIFORM, 0, 4, 20, 1)
    t("Nguyen-9", "Nguyen", A(SIN(x1), SIN(M(x2, x2))), UNIFORM, 0, 1, 20, 2)
    t("Nguyen-10", "Nguyen", M(C(2.0), SIN(x1), COS(x2)), UNIFORM, 0, 1, 20, 2)
    t("Nguyen-11", "Nguyen", EXP(M(x2, LOG(x1))), UNIFORM, 0, 1, 20, 2)
    t("Nguyen-12", "Nguyen",
      S(A(S(POW(x1, 4), POW(x1, 3)), M(C(0.5), POW(x2, 2))), x2), UNIFORM, 0, 1, 20, 2)
    t("Nguyen-2p", "Nguyen", _poly_desc(x1, (4.0, 4), (3.0, 3), (2.0, 2), (1, 1)),
      UNIFORM, -1, 1, 20, 1)
    t("Nguyen-5p", "Nguyen", S(M(SIN(M(x1, x1)), COS(x1)), C(2.0)), UNIFORM, -1, 1, 20, 1)
    t("Nguyen-8p", "Nguyen", POWF(x1, 1 / 3), UNIFORM, 0, 4, 20, 1)
    t("Nguyen-8pp", "Nguyen", POWF(x1, 2 / 3), UNIFORM, 0, 4, 20, 1)
    t("Nguyen-1c", "Nguyen", _poly_desc(x1, (3.39, 3), (2.12, 2), (1.78, 1)),
      UNIFORM, -1, 1, 20, 1)
    t("Nguyen-5c", "Nguyen", S(M(SIN(M(x1, x1)), COS(x1)), C(0.75)), UNIFORM, -1, 1, 20, 1)
    t("Nguyen-7c", "Nguyen", A(LOG(A(x1, C(1.4))), LOG(A(M(x1, x1), C(1.3)))),
      UNIFORM, 0, 2, 20, 1)
    t("Nguyen-8c", "Nguyen", SQRT(M(C(1.23), x1)), UNIFORM, 0, 4, 20, 1)
    t("Nguyen-10c", "Nguyen", M(SIN(M(C(1.5), x1)), COS(M(C(0.5), x2))), UNIFORM, 0, 1, 20, 2)

    # Korns
    t("Korns-1", "Korns", A(C(1.57), M(C(24.3), POW(x1, 4))), UNIFORM, -1, 1, 20, 1)
    t("Korns-2", "Korns", A(C(0.23), M(C(14.2), D(A(x4, x1), M(C(3.0), x2)))),
      UNIFORM, -1, 1, 20, 4)
    t("Korns-3", "Korns",
      S(M(C(4.9), D(A(S(x2, x1), D(x1, x3)), M(C(3.0), x3))), C(5.41)),
      UNIFORM, -1, 1, 20, 3, approx=True)
    t("Korns-4", "Korns", S(M(C(0.13), SIN(x1)), C(2.3)), UNIFORM, -1, 1, 20, 1)
    t("Korns-5", "Korns", A(C(3.0), M(C(2.13), LOG(ABS(x5)))), UNIFORM, -1, 1, 20, 5)
    t("Korns-6", "Korns", A(C(1.3), M(C(0.13), SQRT(ABS(x1)))), UNIFORM, -1, 1, 20, 1)
    t("Korns-7", "Korns", M(C(2.1), S(C(1.0), EXP(M(C(-0.55), x1)))), UNIFORM, -1, 1, 20, 1)
    t("Korns-8", "Korns", A(C(6.87), M(C(11.0), SQRT(ABS(M(C(7.23), x1, x4, x5))))),
      UNIFORM, -1, 1, 20, 5)
    t("Korns-9", "Korns", M(C(12.0), SQRT(ABS(M(C(4.2), x1, x2, x2)))), UNIFORM, -1, 1, 20, 2)
    t("Korns-10", "Korns",
      A(C(0.81), M(C(24.3), D(A(M(C(2.0), x1), M(C(3.0), POW(x2, 2))),
                              A(M(C(4.0), POW(x3, 3)), M(C(5.0), POW(x4, 4)))))),
      UNIFORM, -1, 1, 20, 4, approx=True)
    t("Korns-11", "Korns", A(C(6.87), M(C(11.0), COS(M(C(7.23), POW(x1, 3))))),
      UNIFORM, -1, 1, 20, 1)
    t("Korns-12", "Korns",
      S(C(2.0), M(C(2.1), COS(M(C(9.8), POW(x1, 3))), SIN(M(C(1.3), x5)))),
      UNIFORM, -1, 1, 20, 5)
    t("Korns-13", "Korns",
      S(C(32.0), M(C(3.0), D(TAN(x1), TAN(x2)), D(TAN(x3), TAN(x4)))),
      UNIFORM, -1, 1, 20, 4)
    t("Korns-14", "Korns",
      S(C(22.0), M(S(M(C(4.2), COS(x1)), TAN(x2)), D(TANH(x3), SIN(x4)))),
      UNIFORM, -1, 1, 20, 4)
    t("Korns-15", "Korns",
      S(C(12.0), M(D(M(C(6.0), TAN(x1)), EXP(x2)), S(LOG(x3), TAN(x4)))),
      UNIFORM, -1, 1, 20, 4)

    # Jin
    t("Jin-1", "Jin", S(A(S(M(C(2.5), POW(x1, 4)), M(C(1.3), POW(x1, 3))),
                          M(C(0.5), POW(x2, 2))), M(C(1.7), x2)), UNIFORM, -3, 3, 100, 2)
    t("Jin-2", "Jin", S(A(M(C(8.0), POW(x1, 2)), M(C(8.0), POW(x2, 3))), C(15.0)),
      UNIFORM, -3, 3, 100, 2)
    t("Jin-3", "Jin", S(S(A(M(C(0.2), POW(x1, 3)), M(C(0.5), POW(x2, 3))),
                          M(C(1.2), x2)), M(C(0.5), x1)), UNIFORM, -3, 3, 100, 2)
    t("Jin-4", "Jin", A(M(C(1.5), EXP(x1)), M(C(5.0), COS(x2))), UNIFORM, -3, 3, 100, 2)
    t("Jin-5", "Jin", M(C(6.0), SIN(x1), COS(x2)), UNIFORM, -3, 3, 100, 2)
    t("Jin-6", "Jin", A(M(C(1.35), x1, x2),
                        M(C(5.5), SIN(M(S(x1, C(1.0)), S(x2, C(1.0)))))),
      UNIFORM, -3, 3, 100, 2)

    # Neat
    t("Neat-1", "Neat", _power_sum(x1, 4), UNIFORM, -1, 1, 20, 1)
    t("Neat-2", "Neat", _power_sum(x1, 5), UNIFORM, -1, 1, 20, 1)
    t("Neat-3", "Neat", S(M(SIN(M(x1, x1)), COS(x1)), C(1.0)), UNIFORM, -1, 1, 20, 1)
    t("Neat-4", "Neat", A(LOG(A(x1, C(1.0))), LOG(A(M(x1, x1), C(1.0)))), UNIFORM, 0, 2, 20, 1)
    t("Neat-5", "Neat", M(C(2.0), SIN(x1), COS(x2)), UNIFORM, -1, 1, 100, 2)
    t("Neat-6", "Neat",
      S(A(LOG(x1), C(_EULER_GAMMA), D(C(1.0), M(C(2.0), x1))),
        D(C(1.0), M(C(12.0), M(x1, x1)))),
      EVENLY, 1, 50, 50, 1, approx=True)
    t("Neat-7", "Neat", S(C(2.0), M(C(2.1), COS(M(C(9.8), x1)), SIN(M(C(1.3), x2)))),
      EVENLY, -50, 50, 100000, 2)
    t("Neat-8", "Neat", D(EXP(NEG(M(x1, x1))), A(C(1.2), POW(S(x2, C(2.5)), 2))),
      UNIFORM, 0.3, 4, 100, 2)
    t("Neat-9", "Neat", A(D(C(1.0), A(C(1.0), D(C(1.0), POW(x1, 4)))),
                          D(C(1.0), A(C(1.0), D(C(1.0), POW(x2, 4))))),
      EVENLY, -5, 5, 21, 2)

    # Keijzer
    t("Keijzer-1", "Keijzer", M(C(0.3), x1, SIN(M(C(2 * _PI), x1))), UNIFORM, -1, 1, 20, 1)
    t("Keijzer-2", "Keijzer", M(C(2.0), x1, SIN(M(C(0.5 * _PI), x1))), UNIFORM, -1, 1, 20, 1)
    t("Keijzer-3", "Keijzer", M(C(0.92), x1, SIN(M(C(2.41 * _PI), x1))), UNIFORM, -1, 1, 20, 1)
    t("Keijzer-4", "Keijzer",
      M(POW(x1, 3), EXP(NEG(x1)), COS(x1), SIN(x1),
        S(M(POW(SIN(x1), 2), COS(x1)), C(1.0))), UNIFORM, -1, 1, 20, 1)
    t("Keijzer-5", "Keijzer", A(C(3.0), M(C(2.13), LOG(ABS(x5)))), UNIFORM, -1, 1, 20, 5)
    t("Keijzer-6", "Keijzer", D(M(x1, A(x1, C(1.0))), C(2.0)), UNIFORM, -1, 1, 20, 1)
    t("Keijzer-7", "Keijzer", LOG(x1), UNIFORM, 0, 1, 20, 1)
    t("Keijzer-8", "Keijzer", SQRT(x1), UNIFORM, 0, 1, 20, 1)
    t("Keijzer-9", "Keijzer", LOG(A(x1, SQRT(A(M(x1, x1), C(1.0))))), UNIFORM, -1, 1, 20, 1)
    t("Keijzer-10", "Keijzer", EXP(M(x2, LOG(x1))), UNIFORM, -1, 1, 20, 2)
    t("Keijzer-11", "Keijzer", A(M(x1, x2), SIN(M(S(x1, C(1.0)), S(x2, C(1.0))))),
      UNIFORM, -1, 1, 20, 2)
    t("Keijzer-12", "Keijzer",
      S(A(S(POW(x1, 4), POW(x1, 3)), D(POW(x2, 2), C(2.0))), x2), UNIFORM, -1, 1, 20, 2)
    t("Keijzer-13", "Keijzer", M(C(6.0), SIN(x1), COS(x2)), UNIFORM, -1, 1, 20, 2)
    t("Keijzer-14", "Keijzer", D(C(8.0), A(C(2.0), M(x1, x1), M(x2, x2))),
      UNIFORM, -1, 1, 20, 2)
    t("Keijzer-15", "Keijzer",
      S(S(A(D(POW(x1, 3), C(5.0)), D(POW(x2, 3), C(2.0))), x2), x1), UNIFORM, -1, 1, 20, 2)

    # Livermore
    t("Livermore-1", "Livermore", A(C(1 / 3), x1, SIN(M(x1, x1))), UNIFORM, -3, 3, 100, 1)
    t("Livermore-2", "Livermore", S(M(SIN(M(x1, x1)), COS(x1)), C(2.0)), UNIFORM, -3, 3, 100, 1)
    t("Livermore-3", "Livermore", S(M(SIN(POW(x1, 3)), COS(M(x1, x1))), C(1.0)),
      UNIFORM, -3, 3, 100, 1)
    t("Livermore-4", "Livermore",
      A(LOG(A(x1, C(1.0))), LOG(A(M(x1, x1), C(1.0))), LOG(x1)), UNIFORM, -3, 3, 100, 1)
    t("Livermore-5", "Livermore", S(A(S(POW(x1, 4), POW(x1, 3)), POW(x2, 2)), x2),
      UNIFORM, -3, 3, 100, 2)
    t("Livermore-6", "Livermore", _poly_desc(x1, (4.0, 4), (3.0, 3), (2.0, 2), (1, 1)),
      UNIFORM, -3, 3, 100, 1)
    t("Livermore-7", "Livermore", D(S(EXP(x1), EXP(NEG(x1))), C(2.0)), UNIFORM, -1, 1, 100, 1)
    t("Livermore-8", "Livermore", D(A(EXP(x1), EXP(NEG(x1))), C(3.0)), UNIFORM, -3, 3, 100, 1)
    t("Livermore-9", "Livermore", _power_sum(x1, 9), UNIFORM, -1, 1, 100, 1)
    t("Livermore-10", "Livermore", M(C(6.0), SIN(x1), COS(x2)), UNIFORM, -3, 3, 100, 2)
    t("Livermore-11", "Livermore", D(M(POW(x1, 2), POW(x2, 2)), A(x1, x2)),
      UNIFORM, -3, 3, 100, 2)
    t("Livermore-12", "Livermore", D(POW(x1, 5), POW(x2, 3)), UNIFORM, -3, 3, 100, 2)
    t("Livermore-13", "Livermore", POWF(x1, 1 / 3), UNIFORM, -3, 3, 100, 1)
    t("Livermore-14", "Livermore", A(_power_sum(x1, 3), SIN(x1), SIN(M(x2, x2))),
      UNIFORM, -1, 1, 100, 2)
    t("Livermore-15", "Livermore", POWF(x1, 1 / 5), UNIFORM, -3, 3, 100, 1)
    t("Livermore-16", "Livermore", POWF(x1, 2 / 3), UNIFORM, -3, 3, 100, 1)
    t("Livermore-17", "Livermore", M(C(4.0), SIN(x1), COS(x2)), UNIFORM, -3, 3, 100, 2)
    t("Livermore-18", "Livermore", S(M(SIN(M(x1, x1)), COS(x1)), C(5.0)),
      UNIFORM, -3, 3, 100, 1)
    t("Livermore-19", "Livermore", A(POW(x1, 5), POW(x1, 4), POW(x1, 2), x1),
      UNIFORM, -3, 3, 100, 1)
    t("Livermore-20", "Livermore", EXP(NEG(M(x1, x1))), UNIFORM, -3, 3, 100, 1)
    t("Livermore-21", "Livermore", _power_sum(x1, 8), UNIFORM, -1, 1, 20, 1)
    t("Livermore-22", "Livermore", EXP(M(C(-0.5), M(x1, x1))), UNIFORM, -3, 3, 100, 1)

    # Vladislavleva
    t("Vladislavleva-1", "Vladislavleva",
      D(EXP(NEG(POW(S(x1, C(1.0)), 2))), A(C(1.2), POW(S(x2, C(2.5)), 2))),
      UNIFORM, -1, 1, 20, 2)
    t("Vladislavleva-2", "Vladislavleva",
      M(EXP(NEG(x1)), POW(x1, 3), COS(x1), SIN(x1),
        S(M(COS(x1), POW(SIN(x1), 2)), C(1.0))), UNIFORM, -1, 1, 20, 1)
    t("Vladislavleva-3", "Vladislavleva",
      M(EXP(NEG(x1)), POW(x1, 3), COS(x1), SIN(x1),
        S(M(COS(x1), POW(SIN(x1), 2)), C(1.0)), S(x2, C(5.0))), UNIFORM, -1, 1, 20, 2)
    t("Vladislavleva-4", "Vladislavleva",
      D(C(10.0), A(C(5.0), POW(S(x1, C(3.0)), 2), POW(S(x2, C(3.0)), 2),
                   POW(S(x3, C(3.0)), 2), POW(S(x4, C(3.0)), 2), POW(S(x5, C(3.0)), 2))),
      UNIFORM, 0, 2, 20, 5)
    t("Vladislavleva-5", "Vladislavleva",
      M(C(30.0), S(x1, C(1.0)), D(S(x3, C(1.0)), S(x1, C(10.0))), POW(x2, 2)),
      UNIFORM, -1, 1, 100, 3)
    t("Vladislavleva-6", "Vladislavleva", M(C(6.0), SIN(x1), COS(x2)), EVENLY, 1, 50, 50, 2)
    t("Vladislavleva-7", "Vladislavleva",
      S(C(2.0), M(C(2.1), COS(M(C(9.8), x1)), SIN(M(C(1.3), x2)))),
      EVENLY, -50, 50, 100000, 2)
    t("Vladislavleva-8", "Vladislavleva",
      D(EXP(NEG(POW(S(x1, C(1.0)), 2))), A(C(1.2), POW(S(x2, C(2.5)), 2))),
      UNIFORM, 0.3, 4, 100, 2)

    # Others
    t("Test-2", "Others", M(C(3.14), POW(x1, 2)), UNIFORM, -1, 1, 20, 1)
    t("Const-Test-1", "Others", M(C(5.0), POW(x1, 2)), UNIFORM, -1, 1, 20, 1)
    t("GrammarVAE-1", "Others", A(C(1 / 3), x1, SIN(M(x1, x1))), UNIFORM, -1, 1, 20, 1)
    t("Sine", "Others", A(SIN(x1), SIN(A(x1, M(x1, x1)))), UNIFORM, -1, 1, 20, 1)
    t("Nonic", "Others", _power_sum(x1, 9), UNIFORM, -1, 1, 100, 1)
    t("Pagie-1", "Others", A(D(C(1.0), A(C(1.0), D(C(1.0), POW(x1, 4)))),
                             D(C(1.0), A(C(1.0), D(C(1.0), POW(x2, 4))))),
      EVENLY, 1, 50, 50, 2)
    t("Meier-3", "Others", D(M(POW(x1, 2), POW(x2, 2)), A(x1, x2)),
      EVENLY, -50, 50, 100000, 2)
    t("Meier-4", "Others", D(POW(x1, 5), POW(x2, 3)), UNIFORM, 0.3, 4, 100, 2)
    t("Poly-10", "Others",
      A(M("x1", "x2"), M("x3", "x4"), M("x5", "x6"), M("x1", "x7", "x9"),
        M("x3", "x6", "x10")), EVENLY, -1, 1, 100, 10)

    # Constant
    t("Constant-1", "Constant", _poly_desc(x1, (3.39, 3), (2.12, 2), (1.78, 1)),
      UNIFORM, -4, 4, 100, 1)
    t("Constant-2", "Constant", S(M(SIN(M(x1, x1)), COS(x1)), C(0.75)), UNIFORM, -4, 4, 100, 1)
    t("Constant-3", "Constant", M(SIN(M(C(1.5), x1)), COS(M(C(0.5), x2))),
      UNIFORM, 0.1, 4, 100, 2)
    t("Constant-4", "Constant", M(C(2.7), EXP(M(x2, LOG(x1)))), UNIFORM, 0.3, 4, 100, 2)
    t("Constant-5", "Constant", SQRT(M(C(1.23), x1)), UNIFORM, 0.1, 4, 100, 1)
    t("Constant-6", "Constant", POWF(x1, 0.426), UNIFORM, 0.0, 4, 100, 1)
    t("Constant-7", "Constant", M(C(2.0), SIN(M(C(1.3), x1)), COS(x2)), UNIFORM, -4, 4, 100, 2)
    t("Constant-8", "Constant", A(LOG(A(x1, C(1.4))), LOG(A(M(x1, x1), C(1.3)))),
      UNIFORM, -4, 4, 100, 1)

    # R
    t("R-1", "R", D(POW(A(x1, C(1.0)), 3), A(S(M(x1, x1), x1), C(1.0))),
      UNIFORM, -5, 5, 100, 1)
    t("R-2", "R", D(A(S(POW(x1, 5), M(C(3.0), POW(x1, 3))), C(1.0)),
                    A(M(x1, x1), C(1.0))), UNIFORM, -4, 4, 100, 1)
    t("R-3", "R", D(A(POW(x1, 6), POW(x1, 5)),
                    A(POW(x1, 4), POW(x1, 3), POW(x1, 2), x1, C(1.0))),
      UNIFORM, -4, 4, 100, 1)

    # Feynman subset: the 20 representable equations with the fewest variables,
    # variables mapped to x1.. in order of appearance, sampled U(1, 5, 100).
    sq = lambda v: M(v, v)  # noqa: E731
    fey = [
        ("I.6.20a", D(EXP(M(C(-0.5), sq(x1))), C(math.sqrt(2 * _PI))), 1),
        ("I.6.20", D(EXP(M(C(-0.5), D(sq(x1), sq(x2)))),
                     SQRT(M(C(2 * _PI), sq(x2)))), 2),
        ("I.12.1", M(x1, x2), 2),
        ("I.12.5", M(x1, x2), 2),
        ("I.14.4", D(M(x1, sq(x2)), C(2.0)), 2),
        ("I.25.13", D(x1, x2), 2),
        ("I.29.4", D(x1, x2), 2),
        ("I.34.27", M(x1, x2), 2),
        ("I.39.10", M(C(1.5), x1, x2), 2),
        ("I.6.20b", D(EXP(M(C(-0.5), D(sq(S(x1, x2)), sq(x3)))),
                      SQRT(M(C(2 * _PI), sq(x3)))), 3),
        ("I.12.4", D(x1, M(C(4 * _PI), x2, sq(x3))), 3),
        ("I.14.3", M(x1, x2, x3), 3),
        ("I.15.10", D(M(x1, x2), SQRT(S(C(1.0), D(sq(x2), sq(x3))))), 3),
        ("I.16.6", D(A(x1, x2), A(C(1.0), D(M(x1, x2), sq(x3)))), 3),
        ("I.18.12", M(x1, x2, SIN(x3)), 3),
        ("I.27.6", D(C(1.0), A(D(C(1.0), x1), D(x2, x3))), 3),
        ("I.30.3", M(x1, D(sq(SIN(M(C(0.5), x2, x3))), sq(SIN(M(C(0.5), x3))))), 3),
        ("I.34.10", D(x1, S(C(1.0), D(x2, x3))), 3),
        ("I.34.14", M(D(A(C(1.0), D(x1, x2)), SQRT(S(C(1.0), D(sq(x1), sq(x2))))), x3), 3),
        ("I.37.4", A(x1, x2, M(C(2.0), SQRT(M(x1, x2)), COS(x3))), 3),
    ]
    for name, expr, nv in fey:
        t(f"Feynman-{name}", "Feynman", expr, UNIFORM, 1, 5, 100, nv)

    return r


def _task_seed(name: str) -> int:
    return zlib.crc32(name.encode()) % (2 ** 31)


@lru_cache(maxsize=1)
def registry() -> tuple[BenchmarkTask, ...]:
    tasks = []
    for name, suite, expr, mode, low, high, count, dims, approx in _rows():
        spec = SamplingSpec(mode, float(low), float(high), int(count), int(dims),
                            _task_seed(name))
        tasks.append(BenchmarkTask(name, suite, expr, spec, approx))
    return tuple(tasks)


def registry_by_name() -> dict[str, BenchmarkTask]:
    return {t.name: t for t in registry()}


def suites() -> list[str]:
    seen: list[str] = []
    for t in registry():
        if t.suite not in seen:
            seen.append(t.suite)
    return seen


def suite_tasks(suite: str) -> list[BenchmarkTask]:
    out = [t for t in registry() if t.suite == suite]
    if not out:
        raise ValueError(f"unknown suite {suite!r}")
    return out


# --- sampling ---------------------------------------------------------------

_REJECT_LIMIT = 64  # resampling rounds before declaring the domain exhausted


def sample(task: BenchmarkTask, seed: int | None = None) -> Dataset:
    """Draw a dataset for the task; y is the protected evaluation of the
    target, with rows rejected where the unprotected target is non-finite."""
    spec = task.spec if seed is None else replace(task.spec, seed=seed)
    return sample_expression(task.target, spec, task.name)


def sample_expression(target: ExprTree, spec: SamplingSpec, name: str = "synthetic") -> Dataset:
    """Sample a supervised dataset from an arbitrary target expression."""
    rng = np.random.default_rng(spec.seed)
    if spec.mode == UNIFORM:
        X = _sample_uniform(target, spec, rng)
    else:
        X = _sample_evenly(target, spec, rng)
    y = eval_tree(target, X)
    return Dataset(X, y, name, spec.seed, 0.0, spec)


def _sample_uniform(target, spec, rng) -> np.ndarray:
    kept: list[np.ndarray] = []
    have = 0
    drawn = 0
    for _ in range(_REJECT_LIMIT):
        need = spec.count - have
        batch = rng.uniform(spec.low, spec.high, size=(max(need, 8), spec.dims))
        raw = eval_tree_raw(target, batch)
        ok = np.isfinite(raw)
        drawn += batch.shape[0]
        take = batch[ok][:need]
        if take.size:
            kept.append(take)
            have += take.shape[0]
        if have >= spec.count:
            return np.vstack(kept)[: spec.count]
        if drawn >= 10 * spec.count and have < 0.1 * drawn:
            break
    raise DomainExhausted(f"target for task is non-finite on most of "
                          f"[{spec.low}, {spec.high}]^{spec.dims}")


def _sample_evenly(target, spec, rng) -> np.ndarray:
    base = np.linspace(spec.low, spec.high, spec.count)
    cols = [base]
    # Joint pairing across dimensions is unspecified for evenly-spaced data;
    # each extra dimension gets a seeded permutation of the same grid.
    for _ in range(1, spec.dims):
        cols.append(rng.permutation(base))
    X = np.column_stack(cols)
    raw = eval_tree_raw(target, X)
    X = X[np.isfinite(raw)]
    if X.shape[0] < 2:
        raise DomainExhausted("fewer than two finite rows under evenly-spaced sampling")
    return X


def dense_resample(ds: Dataset, factor: int, seed_offset: int) -> np.ndarray:
    """Fresh X over the same domain, `factor` times denser (recovery checks)."""
    spec = ds.spec
    rng = np.random.default_rng(spec.seed + seed_offset)
    n = spec.count * factor
    if spec.mode == UNIFORM:
        return rng.uniform(spec.low, spec.high, size=(n, spec.dims))
    base = np.linspace(spec.low, spec.high, n)
    cols = [base] + [rng.permutation(base) for _ in range(1, spec.dims)]
    return np.column_stack(cols)


# --- noise ------------------------------------------------------------------

NOISE_LEVELS = tuple(round(0.01 * i, 2) for i in range(11))


def add_noise(ds: Dataset, level: float, seed: int | None = None) -> Dataset:
    """Additive uniform noise on y, amplitude level * |max(y) - min(y)|."""
    if not any(abs(level - lv) < 1e-12 for lv in NOISE_LEVELS):
        raise ValueError(f"noise level must be one of {NOISE_LEVELS}")
    if level == 0.0:
        return ds
    span = abs(float(np.max(ds.y) - np.min(ds.y)))
    if seed is None:
        seed = ds.seed + int(round(level * 100)) * 7919 + 13
    rng = np.random.default_rng(seed)
    u = rng.uniform(-level * span, level * span, size=ds.y.shape)
    return Dataset(ds.X, ds.y + u, ds.task_name, ds.seed, level, ds.spec)


# --- summaries --------------------------------------------------------------

def summarize(ds: Dataset) -> np.ndarray:
    """Fixed-length, row-permutation-invariant statistics vector:
    (min, max, mean, population std) per input dimension and for y, then the
    row count. Length 4 * (dims + 1) + 1."""
    if ds.n < 1:
        raise ValueError("empty dataset")
    parts = []
    for k in range(ds.dims):
        col = ds.X[:, k]
        parts.extend([np.min(col), np.max(col), np.mean(col), np.std(col)])
    parts.extend([np.min(ds.y), np.max(ds.y), np.mean(ds.y), np.std(ds.y)])
    parts.append(float(ds.n))
    return np.asarray(parts, dtype=float)


# --- persistence ------------------------------------------------------------

def dataset_to_csv(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = ",".join([f"x{i + 1}" for i in range(ds.dims)] + ["y"])
        fh.write(header + "\n")
        for row, yv in zip(ds.X, ds.y):
            fh.write(",".join(repr(float(v)) for v in row) + f",{float(yv)!r}\n")


def dataset_from_csv(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = header.split(",") if header else []
        if not cols or cols[-1] != "y":
            raise ValueError("last column: expected 'y', found "
                             f"{cols[-1]!r}" if cols else "empty header")
        for i, name in enumerate(cols[:-1]):
            if name != f"x{i + 1}":
                raise ValueError(f"column {i + 1}: expected 'x{i + 1}', found {name!r}")
        rows = []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(cols):
                raise ValueError(f"line {line_no}: expected {len(cols)} fields, "
                                 f"found {len(parts)}")
            rows.append([float(v) for v in parts])
    if len(rows) < 2:
        raise ValueError("need at least two data rows")
    arr = np.asarray(rows, dtype=float)
    X, y = arr[:, :-1], arr[:, -1]
    dims = X.shape[1]
    spec = SamplingSpec(UNIFORM, float(np.min(X)), float(np.max(X)) + 1e-9,
                        X.shape[0], dims, 0)
    return Dataset(X, y, "csv", 0, 0.0, spec)


def registry_to_json(path=None) -> str:
    entries = [
        {
            "name": t.name,
            "suite": t.suite,
            "expression": t.expression,
            "mode": t.spec.mode,
            "low": t.spec.low,
            "high": t.spec.high,
            "count": t.spec.count,
            "dims": t.spec.dims,
        }
        for t in registry()
    ]
    text = json.dumps(entries, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text
