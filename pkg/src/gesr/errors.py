"""Exception types shared across the package."""


class GesrError(Exception):
    """Base class for all package-specific errors."""


class OutOfRange(GesrError):
    """An index or position argument falls outside its valid range."""


class RepairImpossible(GesrError):
    """A token sequence is empty after trimming and cannot be repaired."""


class UnsupportedNode(GesrError):
    """A node cannot take part in the requested operation."""


class UnboundVariable(GesrError):
    """An expression references a variable the data does not provide."""


class LengthMismatch(GesrError):
    """Two vectors that must align have different lengths."""


class NonFiniteObjective(GesrError):
    """An objective function returned NaN or infinity at its start point."""


class DomainExhausted(GesrError):
    """Rejection sampling failed: most of the domain maps to non-finite values."""


class InsufficientData(GesrError):
    """Not enough training material to fit a model."""


class InvalidProbability(GesrError):
    """A probability parameter lies outside (0, 1)."""
