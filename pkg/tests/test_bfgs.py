import numpy as np
import pytest

from gesr.bfgs import OptConfig, gradient, minimize, optimize_constants
from gesr.datasets import SamplingSpec, registry_by_name, sample, sample_expression
from gesr.errors import NonFiniteObjective
from gesr.evaluate import fitness, mse, eval_tree
from gesr.generate import random_tree
from gesr.tree import constant_values, parse_expr


def test_gradient_simple_cases():
    g = gradient(lambda v: float(v[0] ** 2), np.array([3.0]))
    assert abs(g[0] - 6.0) <= 1e-5
    g = gradient(lambda v: float(v[0] * v[1]), np.array([2.0, 5.0]))
    assert abs(g[0] - 5.0) <= 1e-5 and abs(g[1] - 2.0) <= 1e-5


def test_gradient_nonfinite_raises():
    with pytest.raises(NonFiniteObjective):
        gradient(lambda v: float("nan"), np.array([0.0]))


def test_minimize_quadratic():
    x = minimize(lambda v: float((v[0] - 3) ** 2), np.array([0.0]))
    assert abs(x[0] - 3.0) <= 1e-8


def test_minimize_rosenbrock_vs_descent_oracle():
    def rosen(v):
        return float((1 - v[0]) ** 2 + 100 * (v[1] - v[0] ** 2) ** 2)

    x = minimize(rosen, np.array([-1.2, 1.0]), OptConfig(max_iters=300))
    assert np.max(np.abs(x - 1.0)) <= 1e-5
    # slow gradient-descent oracle heads to the same optimum
    y = np.array([-1.2, 1.0])
    for _ in range(200000):
        g = np.array([-2 * (1 - y[0]) - 400 * y[0] * (y[1] - y[0] ** 2),
                      200 * (y[1] - y[0] ** 2)])
        y -= 1e-3 * g
    assert np.max(np.abs(y - 1.0)) <= 1e-2
    assert np.max(np.abs(x - y)) <= 1e-2


def test_minimize_constant_objective_returns_start():
    x0 = np.array([1.5, -2.0])
    x = minimize(lambda v: 7.0, x0)
    np.testing.assert_array_equal(x, x0)


def test_minimize_nonfinite_start_raises():
    with pytest.raises(NonFiniteObjective):
        minimize(lambda v: float("inf"), np.array([0.0]))


def test_minimize_pd_quadratic_iteration_bound():
    rng = np.random.default_rng(31)
    for n in (1, 2, 4, 6):
        A = rng.normal(size=(n, n))
        A = A @ A.T + n * np.eye(n)
        b = rng.normal(size=n)

        calls = [0]

        def f(v, A=A, b=b):
            calls[0] += 1
            return float(0.5 * v @ A @ v - b @ v)

        cfg = OptConfig(max_iters=n + 5, restarts=1)
        x = minimize(f, rng.normal(size=n), cfg)
        g = A @ x - b
        assert np.max(np.abs(g)) < 1e-6  # near-stationary within n+5 iterations


def test_optimize_constants_least_squares_oracle():
    spec = SamplingSpec("U", -1, 1, 30, 1, 7)
    ds = sample_expression(parse_expr("(mul (const 2.0) x1)"), spec)
    t = parse_expr("(mul (const 0.3) x1)")
    out, fit = optimize_constants(t, ds)
    # closed form: C = <x, y> / <x, x>
    x = ds.X[:, 0]
    c_star = float(x @ ds.y / (x @ x))
    assert abs(constant_values(out)[0] - c_star) <= 1e-6
    assert abs(c_star - 2.0) <= 1e-12
    assert fit.r2 >= 1.0 - 1e-12


def test_optimize_constants_no_constants_identity():
    ds = sample(registry_by_name()["Nguyen-1"])
    t = parse_expr("(add x1 (mul x1 x1))")
    out, fit = optimize_constants(t, ds)
    assert out == t


def test_optimize_constants_never_increases_mse():
    rng = np.random.default_rng(32)
    task = registry_by_name()["Nguyen-1"]
    ds = sample(task)
    for i in range(40):
        t = random_tree(rng, 12, 1)
        before = mse(ds.y, eval_tree(t, ds.X))
        out, fit = optimize_constants(t, ds, OptConfig(max_iters=20, restarts=2, seed=i))
        if np.isfinite(before):
            assert fit.mse <= before + 1e-12


def test_optimize_constants_deterministic():
    task = registry_by_name()["Constant-2"]
    ds = sample(task)
    t = parse_expr("(sub (mul (sin (mul x1 x1)) (cos x1)) (const 0.2))")
    cfg = OptConfig(max_iters=60, restarts=3, seed=9)
    a, _ = optimize_constants(t, ds, cfg)
    b, _ = optimize_constants(t, ds, cfg)
    assert constant_values(a) == constant_values(b)


def test_constant1_structure_recovery():
    task = registry_by_name()["Constant-1"]
    skeleton = parse_expr(
        "(add (add (mul (const 1.0) (mul (mul x1 x1) x1)) "
        "(mul (const 1.0) (mul x1 x1))) (mul (const 1.0) x1))")
    for seed in range(3):
        ds = sample(task, seed=seed)
        out, fit = optimize_constants(skeleton, ds, OptConfig(seed=seed))
        vals = constant_values(out)
        assert abs(vals[0] - 3.39) <= 1e-3
        assert abs(vals[1] - 2.12) <= 1e-3
        assert abs(vals[2] - 1.78) <= 1e-3
