import numpy as np

from gesr.distance import ned, tree_edit_distance
from gesr.generate import random_tree
from gesr.tree import parse_expr
from gesr.vocab import CONSTANT


def _label(token):
    return (CONSTANT,) if token.kind == CONSTANT else (token.kind, token.symbol)


def _to_plain(node):
    return (_label(node.token), tuple(_to_plain(c) for c in node.children))


def _size(n):
    return 1 + sum(_size(c) for c in n[1])


def _oracle(a, b):
    """Plain memoized forest-distance recursion, independent of the
    keyroot-based implementation."""
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
            r1 = forest(f1[:-1] + t1[1], f2) + 1
            r2 = forest(f1, f2[:-1] + t2[1]) + 1
            rel = 0 if t1[0] == t2[0] else 1
            r3 = forest(f1[:-1], f2[:-1]) + forest(t1[1], t2[1]) + rel
            r = min(r1, r2, r3)
        memo[key] = r
        return r

    return forest((_to_plain(a.root),), (_to_plain(b.root),))


def test_distance_trivial():
    a = parse_expr("(add x1 x1)")
    assert tree_edit_distance(a, a) == 0
    b = parse_expr("(mul x1 x1)")
    assert tree_edit_distance(a, b) == 1


def test_constants_are_one_symbol_class():
    a = parse_expr("(add x1 (const 2.0))")
    b = parse_expr("(add x1 (const 977.5))")
    assert tree_edit_distance(a, b) == 0


def test_matches_bruteforce_oracle():
    rng = np.random.default_rng(10)
    for _ in range(200):
        a = random_tree(rng, 9, 2)
        b = random_tree(rng, 9, 2)
        assert tree_edit_distance(a, b) == _oracle(a, b)


def test_metric_properties():
    rng = np.random.default_rng(11)
    trees = [random_tree(rng, 8, 2) for _ in range(12)]
    for a in trees:
        assert tree_edit_distance(a, a) == 0
    for a in trees[:6]:
        for b in trees[6:]:
            assert tree_edit_distance(a, b) == tree_edit_distance(b, a)
    for i in range(0, 9, 3):
        a, b, c = trees[i], trees[i + 1], trees[i + 2]
        assert (tree_edit_distance(a, c)
                <= tree_edit_distance(a, b) + tree_edit_distance(b, c))


def test_ned():
    a = parse_expr("(add x1 x1)")
    assert ned(a, a) == 0.0
    truth = parse_expr("(add x1 x1)")  # 3 nodes
    pred = parse_expr("(sin (sin (sin (sin (sin (sin (sin x2)))))))")
    assert ned(pred, truth) == 1.0  # distance exceeds |truth| -> capped
    pred2 = parse_expr("(add x1 x2)")
    assert ned(pred2, truth) == 1.0 / 3.0
    rng = np.random.default_rng(12)
    for _ in range(100):
        p = random_tree(rng, 9, 2)
        t = random_tree(rng, 9, 2)
        assert 0.0 <= ned(p, t) <= 1.0
