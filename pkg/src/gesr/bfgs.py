"""Quasi-Newton (BFGS) minimization with finite-difference gradients, and
constant refinement for expression trees."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteObjective
from .evaluate import Fitness, compile_tree, fitness, run_program
from .tree import ExprTree, constant_values, with_constants

FD_STEP = 1e-6
ARMIJO_C1 = 1e-4
MIN_STEP = 1e-12


@dataclass(frozen=True)
class OptConfig:
    max_iters: int = 100
    restarts: int = 3
    gtol: float = 1e-8
    seed: int = 0


def gradient(f, x: np.ndarray) -> np.ndarray:
    """Central finite differences, per-coordinate step 1e-6 * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        h = FD_STEP * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = f(xp), f(xm)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NonFiniteObjective("objective non-finite near gradient point")
        g[i] = (fp - fm) / (2.0 * h)
    return g


def minimize(f, x0, cfg: OptConfig = OptConfig()) -> np.ndarray:
    """BFGS with a backtracking (quadratic-interpolating) line search.

    Stops when the max-abs gradient drops below cfg.gtol, the step falls
    below 1e-12, or cfg.max_iters is reached; returns the best iterate seen.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    fx = f(x)
    if not math.isfinite(fx):
        raise NonFiniteObjective("objective non-finite at start point")
    best_x, best_f = x.copy(), fx
    H = np.eye(n)
    g = gradient(f, x)
    for _ in range(cfg.max_iters):
        if np.max(np.abs(g)) < cfg.gtol:
            break
        p = -H @ g
        m = float(g @ p)
        if m >= 0:  # not a descent direction; reset to steepest descent
            H = np.eye(n)
            p = -g
            m = float(g @ p)
            if m == 0.0:
                break
        alpha, f_new = _line_search(f, x, p, fx, m)
        if alpha is None:
            break
        step = alpha * p
        if np.max(np.abs(step)) < MIN_STEP:
            x_new = x + step
            if math.isfinite(f_new) and f_new < best_f:
                best_x, best_f = x_new.copy(), f_new
            break
        x_new = x + step
        g_new = gradient(f, x_new)
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12:
            rho = 1.0 / sy
            I = np.eye(n)
            V = I - rho * np.outer(s, yv)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new
        if fx < best_f:
            best_x, best_f = x.copy(), fx
    return best_x


def _line_search(f, x, p, fx, m, max_backtracks: int = 30):
    """Armijo backtracking; the first backtrack uses the quadratic
    interpolation minimizer, which is exact on quadratic objectives."""
    alpha = 1.0
    for k in range(max_backtracks):
        f_try = f(x + alpha * p)
        if math.isfinite(f_try) and f_try <= fx + ARMIJO_C1 * alpha * m:
            return alpha, f_try
        if k == 0 and math.isfinite(f_try):
            denom = 2.0 * (f_try - fx - m * alpha)
            if denom > 0:
                interp = -m * alpha * alpha / denom
                if 0 < interp < alpha:
                    alpha = interp
                    continue
        alpha *= 0.5
        if alpha < MIN_STEP:
            return None, fx
    return None, fx


def optimize_constants(t: ExprTree, ds, cfg: OptConfig = OptConfig()) -> tuple[ExprTree, Fitness]:
    """Refit the tree's constant values by BFGS on MSE; never increases MSE.

    A tree without constants is returned unchanged with zero optimizer work.
    Restarts beyond the first start from uniform [-5, 5] draws.
    """
    theta0 = np.asarray(constant_values(t), dtype=float)
    if theta0.size == 0:
        return t, fitness(t, ds)
    program = compile_tree(t, const_slots=True)
    y = ds.y

    def objective(theta):
        yhat = run_program(program, ds.X, theta=theta)
        with np.errstate(all="ignore"):
            return float(np.mean((y - yhat) ** 2))

    starts = [theta0]
    rng = np.random.default_rng(cfg.seed)
    for _ in range(max(0, cfg.restarts - 1)):
        starts.append(rng.uniform(-5.0, 5.0, size=theta0.size))

    best_theta, best_mse = theta0, objective(theta0)
    for x0 in starts:
        f0 = objective(x0)
        if not math.isfinite(f0):
            continue
        try:
            theta = minimize(objective, x0, cfg)
        except NonFiniteObjective:
            continue
        m = objective(theta)
        if math.isfinite(m) and m < best_mse:
            best_theta, best_mse = theta, m
    out = with_constants(t, [float(v) for v in best_theta])
    return out, fitness(out, ds)
