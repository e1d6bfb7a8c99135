"""Ordered tree edit distance (Zhang–Shasha) and its normalized form.

Unit insert/delete/relabel costs; constant nodes form a single symbol class,
so two constants always match at zero cost regardless of value.
"""

from __future__ import annotations

from .tree import ExprTree
from .vocab import CONSTANT


def _label(token) -> tuple:
    if token.kind == CONSTANT:
        return (CONSTANT,)
    return (token.kind, token.symbol)


def _annotate(t: ExprTree):
    """Postorder labels, leftmost-leaf indices and keyroots."""
    labels: list[tuple] = []
    lmld: list[int] = []

    def walk(node) -> int:
        if not node.children:
            labels.append(_label(node.token))
            lmld.append(len(labels) - 1)
            return len(labels) - 1
        first = None
        for child in node.children:
            idx = walk(child)
            if first is None:
                first = lmld[idx]
        labels.append(_label(node.token))
        lmld.append(first)
        return len(labels) - 1

    walk(t.root)
    n = len(labels)
    keyroots = [i for i in range(n) if not any(lmld[j] == lmld[i] for j in range(i + 1, n))]
    return labels, lmld, keyroots


def tree_edit_distance(a: ExprTree, b: ExprTree) -> int:
    la, lla, kra = _annotate(a)
    lb, llb, krb = _annotate(b)
    m, n = len(la), len(lb)
    td = [[0] * n for _ in range(m)]

    for i in kra:
        for j in krb:
            _treedist(i, j, la, lla, lb, llb, td)
    return td[m - 1][n - 1]


def _treedist(i, j, la, lla, lb, llb, td) -> None:
    li, lj = lla[i], llb[j]
    rows = i - li + 2
    cols = j - lj + 2
    fd = [[0] * cols for _ in range(rows)]
    for x in range(1, rows):
        fd[x][0] = fd[x - 1][0] + 1
    for y in range(1, cols):
        fd[0][y] = fd[0][y - 1] + 1
    for x in range(1, rows):
        for y in range(1, cols):
            ai = li + x - 1
            bj = lj + y - 1
            if lla[ai] == li and llb[bj] == lj:
                rel = 0 if la[ai] == lb[bj] else 1
                fd[x][y] = min(fd[x - 1][y] + 1,
                               fd[x][y - 1] + 1,
                               fd[x - 1][y - 1] + rel)
                td[ai][bj] = fd[x][y]
            else:
                p = lla[ai] - li
                q = llb[bj] - lj
                fd[x][y] = min(fd[x - 1][y] + 1,
                               fd[x][y - 1] + 1,
                               fd[p][q] + td[ai][bj])


def ned(pred: ExprTree, truth: ExprTree) -> float:
    """Normalized edit distance, capped at 1."""
    d = tree_edit_distance(pred, truth)
    return min(1.0, d / truth.node_count)
