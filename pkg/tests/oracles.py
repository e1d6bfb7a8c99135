"""Independent oracles shared by the unit and acceptance tests. These are
deliberately written from the definitions, not from the library code paths
they check."""

import numpy as np

from gesr.vocab import CONSTANT


def r2_reference(y, yhat):
    """Coefficient of determination computed with plain Python sums."""
    y = list(map(float, y))
    yhat = list(map(float, yhat))
    ybar = sum(y) / len(y)
    num = sum((a - b) ** 2 for a, b in zip(y, yhat))
    den = sum((a - ybar) ** 2 for a in y)
    if den == 0.0:
        return 1.0 if num == 0.0 else float("-inf")
    return 1.0 - num / den


def _label(token):
    return (CONSTANT,) if token.kind == CONSTANT else (token.kind, token.symbol)


def _plain(node):
    return (_label(node.token), tuple(_plain(c) for c in node.children))


def _size(n):
    return 1 + sum(_size(c) for c in n[1])


def edit_distance_reference(a, b):
    """Memoized forest-distance recursion over ordered trees."""
    memo = {}

    def forest(f1, f2):
        if not f1 and not f2:
            return 0
        key = (f1, f2)
        if key in memo:
            return memo[key]
        if not f1:
            r = sum(_size(t) for t in f2)
        elif not f2:
            r = sum(_size(t) for t in f1)
        else:
            t1, t2 = f1[-1], f2[-1]
            r = min(
                forest(f1[:-1] + t1[1], f2) + 1,
                forest(f1, f2[:-1] + t2[1]) + 1,
                forest(f1[:-1], f2[:-1]) + forest(t1[1], t2[1])
                + (0 if t1[0] == t2[0] else 1),
            )
        memo[key] = r
        return r

    return forest((_plain(a.root),), (_plain(b.root),))
