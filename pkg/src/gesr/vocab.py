"""Symbol vocabulary: typed tokens with fixed arities.

The vocabulary is closed: 4 binary operators, 5 unary operators, 10
variables, one constant placeholder and 3 special markers. Constant tokens
may carry a literal value; two constant tokens compare equal only when
their values do, while ``same_symbol`` ignores the payload.
"""

from __future__ import annotations

from dataclasses import dataclass

BINARY = "binary"
UNARY = "unary"
VARIABLE = "variable"
CONSTANT = "constant"
MASK = "mask"
SEP = "sep"
PAD = "pad"

BINARY_OPS = ("add", "sub", "mul", "div")
UNARY_OPS = ("sin", "cos", "exp", "log", "sqrt")
MAX_VARIABLES = 10
VARIABLE_NAMES = tuple(f"x{i}" for i in range(1, MAX_VARIABLES + 1))
CONST_SYMBOL = "C"


@dataclass(frozen=True)
class Token:
    kind: str
    symbol: str
    value: float | None = None

    @property
    def arity(self) -> int:
        if self.kind == BINARY:
            return 2
        if self.kind == UNARY:
            return 1
        return 0

    @property
    def is_operator(self) -> bool:
        return self.kind in (BINARY, UNARY)

    @property
    def is_special(self) -> bool:
        return self.kind in (MASK, SEP, PAD)

    def same_symbol(self, other: "Token") -> bool:
        """Symbol-class equality: constants match regardless of value."""
        return self.kind == other.kind and self.symbol == other.symbol

    def __repr__(self) -> str:
        if self.kind == CONSTANT and self.value is not None:
            return f"Token(C={self.value!r})"
        return f"Token({self.symbol})"


TOK = {name: Token(BINARY, name) for name in BINARY_OPS}
TOK.update({name: Token(UNARY, name) for name in UNARY_OPS})
TOK.update({name: Token(VARIABLE, name) for name in VARIABLE_NAMES})
TOK[CONST_SYMBOL] = Token(CONSTANT, CONST_SYMBOL)
TOK["[MASK]"] = Token(MASK, "[MASK]")
TOK["[SEP]"] = Token(SEP, "[SEP]")
TOK["[PAD]"] = Token(PAD, "[PAD]")

MASK_TOKEN = TOK["[MASK]"]
SEP_TOKEN = TOK["[SEP]"]
PAD_TOKEN = TOK["[PAD]"]

# Canonical ordering used for deterministic tie-breaking ("lowest index").
FILLABLE_SYMBOLS = BINARY_OPS + UNARY_OPS + VARIABLE_NAMES + (CONST_SYMBOL,)
SYMBOL_INDEX = {sym: i for i, sym in enumerate(FILLABLE_SYMBOLS)}


def const(value: float) -> Token:
    """Constant token carrying a literal value."""
    return Token(CONSTANT, CONST_SYMBOL, float(value))


def var(index: int) -> Token:
    """Variable token x{index}, 1-based."""
    if not 1 <= index <= MAX_VARIABLES:
        raise ValueError(f"variable index {index} outside 1..{MAX_VARIABLES}")
    return TOK[f"x{index}"]


def var_index(token: Token) -> int:
    """1-based index of a variable token."""
    return int(token.symbol[1:])


def fillable_tokens(dims: int) -> list[Token]:
    """All tokens a mask may be filled with, for a task of `dims` inputs."""
    out = [TOK[s] for s in BINARY_OPS + UNARY_OPS]
    out.extend(TOK[s] for s in VARIABLE_NAMES[:dims])
    out.append(TOK[CONST_SYMBOL])
    return out
