"""Vector-field benchmark on chaotic ODE systems: registry, fixed-step RK4
integration, smoothed numerical differentiation, per-dimension fit quality
and short-horizon rollout consistency."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bfgs import OptConfig, optimize_constants
from .datasets import A, C, D, M, NEG, POW, S, Dataset, SamplingSpec, UNIFORM
from .evaluate import compile_scalar_fn, eval_tree, r_squared
from .tree import ExprTree, parse_expr

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class OdeSystem:
    name: str
    dim: int
    rhs_exprs: tuple[str, ...]
    params: dict
    x0: tuple[float, ...]
    h: float
    transient_steps: int = 10_000

    @property
    def rhs(self) -> tuple[ExprTree, ...]:
        return tuple(parse_expr(e) for e in self.rhs_exprs)


def _sys(name, exprs, params, x0=None, h=1e-3, transient=10_000):
    dim = len(exprs)
    if x0 is None:
        x0 = tuple(1.01 for _ in range(dim))
    return OdeSystem(name, dim, tuple(exprs), params, tuple(x0), h, transient)


@lru_cache(maxsize=1)
def ode_registry() -> tuple[OdeSystem, ...]:
    x1, x2, x3, x4 = "x1", "x2", "x3", "x4"
    systems = [
        _sys("NewtonLiepnik",
             (A(M(C(-0.4), x1), x2, M(C(10.0), x2, x3)),
              A(S(NEG(x1), M(C(0.4), x2)), M(C(5.0), x1, x3)),
              S(M(C(0.175), x3), M(C(5.0), x1, x2))),
             {"a": 0.4, "b": 0.175}, x0=(0.349, 0.0, -0.16)),
        _sys("HyperLorenz",
             (A(M(C(10.0), S(x2, x1)), x4),
              S(A(NEG(M(x1, x3)), M(C(28.0), x1)), x2),
              A(M(C(-2.667), x3), M(x1, x2)),
              S(M(C(1.1), x4), M(x1, x3))),
             {"a": 10.0, "b": 2.667, "c": 28.0, "d": 1.1}, h=1e-4),
        _sys("HyperJha",
             (A(M(C(10.0), S(x2, x1)), x4),
              S(A(NEG(M(x1, x3)), M(C(28.0), x1)), x2),
              S(M(x1, x2), M(C(2.667), x3)),
              A(NEG(M(x1, x3)), M(C(1.3), x4))),
             {"a": 10.0, "b": 28.0, "c": 2.667, "d": 1.3}, h=1e-4),
        _sys("HyperPang",
             (M(C(36.0), S(x2, x1)),
              A(NEG(M(x1, x3)), M(C(20.0), x2), x4),
              S(M(x1, x2), M(C(3.0), x3)),
              M(C(-2.0), A(x1, x2))),
             {"a": 36.0, "b": 3.0, "c": 20.0, "d": 2.0}, h=1e-4),
        _sys("ShimizuMorioka",
             (x2,
              S(S(x1, M(C(0.85), x2)), M(x1, x3)),
              A(M(C(-0.5), x3), M(x1, x1))),
             {"a": 0.85, "b": 0.5}),
        _sys("GenesioTesi",
             (x2,
              x3,
              A(S(S(NEG(x1), M(C(1.1), x2)), M(C(0.44), x3)), M(x1, x1))),
             {"a": 0.44, "b": 1.1, "c": 1.0}, x0=(0.1, 0.1, 0.1)),
        _sys("Laser",
             (A(M(C(10.0), S(x2, x1)), M(x2, x3, x3)),
              S(M(C(5.0), x1), M(x1, x3, x3)),
              S(M(C(-5.0), x3), M(C(6.0), x1, x1))),
             {"a": 10.0, "b": 1.0, "c": 5.0, "d": -1.0, "h": -5.0, "k": -6.0}),
        _sys("Duffing",
             (x2,
              S(S(M(C(-0.1), x2), M(C(-1.0), x1)), POW(x1, 3)),
              C(1.4)),
             {"alpha": 1.0, "beta": -1.0, "delta": 0.1, "omega": 1.4}),
        _sys("Brusselator",
             (S(A(C(0.4), M(x1, x1, x2)), M(C(2.2), x1)),
              S(M(C(1.2), x1), M(x1, x1, x2)),
              C(0.81)),
             {"a": 0.4, "b": 1.2, "w": 0.81}),
        _sys("KawczynskiStrizhak",
             (M(C(0.49), A(S(x2, POW(x1, 3)), M(C(6.3), x1))),
              S(S(S(M(C(-4.2), x1), x2), x3), C(0.4)),
              M(C(0.2), S(x1, x3))),
             {"beta": -0.4, "gamma": 0.49, "kappa": 0.2, "mu": 2.1}),
        _sys("Rucklidge",
             (S(A(M(C(-2.0), x1), M(C(6.7), x2)), M(x2, x3)),
              x1,
              A(NEG(x3), M(x2, x2))),
             {"a": 2.0, "b": 6.7}),
        _sys("FitzHughNagumo",
             (A(S(S(x1, D(POW(x1, 3), C(3.0))), x2), C(0.965)),
              M(C(0.08), S(A(x1, C(0.7)), M(C(0.8), x2))),
              C(0.04365)),
             {"a": 0.7, "b": 0.8, "curr": 0.965, "gamma": 0.08, "omega": 0.04365}),
        _sys("Finance",
             (A(M(C(4.999), x1), x3, M(x1, x2)),
              S(M(C(-0.2), x2), M(x1, x1)),
              S(NEG(x1), M(C(1.1), x3))),
             {"a": 0.001, "b": 0.2, "c": 1.1}),
        _sys("DequanLi",
             (A(M(C(40.0), S(x2, x1)), M(C(0.16), x1, x3)),
              S(A(M(C(55.0), x1), M(C(20.0), x2)), M(x1, x3)),
              S(A(M(C(1.833), x3), M(x1, x2)), M(C(0.65), x1, x1))),
             {"a": 40.0, "c": 1.833, "d": 0.16, "eps": 0.65, "f": 20.0, "k": 55.0},
             h=1e-4),
        _sys("Hadley",
             (A(S(S(NEG(M(x2, x2)), M(x3, x3)), M(C(0.2), x1)), C(1.8)),
              A(S(S(M(x1, x2), M(C(4.0), x1, x3)), x2), C(1.0)),
              S(A(M(C(4.0), x1, x2), M(x1, x3)), x3)),
             {"a": 0.2, "b": 4.0, "f": 9.0, "g": 1.0}),
        _sys("SprottJerk",
             (x2,
              x3,
              S(A(NEG(x1), M(x2, x2)), M(C(2.017), x3))),
             {"mu": 2.017}),
    ]
    return tuple(systems)


def system_by_name(name: str) -> OdeSystem:
    for s in ode_registry():
        if s.name == name:
            return s
    raise ValueError(f"unknown system {name!r}")


# --- integration --------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (steps+1, dim)
    h: float
    completed: bool


def _compile_rhs(rhs: tuple[ExprTree, ...], dim: int):
    fns = [compile_scalar_fn(t, dim) for t in rhs]

    def f(state):
        return [fn(*state) for fn in fns]

    return f


def integrate(sys: OdeSystem | tuple, x0=None, h: float | None = None,
              steps: int = 1000) -> Trajectory:
    """Classical fixed-step RK4. Aborts on non-finite or diverging states,
    returning the partial trajectory flagged incomplete."""
    if isinstance(sys, OdeSystem):
        rhs, dim = sys.rhs, sys.dim
        x0 = tuple(sys.x0) if x0 is None else tuple(x0)
        h = sys.h if h is None else h
    else:
        rhs = tuple(sys)
        dim = len(rhs)
        x0 = tuple(x0)
        h = 1e-3 if h is None else h
    f = _compile_rhs(rhs, dim)
    out = np.empty((steps + 1, dim))
    out[0] = x0
    state = list(map(float, x0))
    completed = True
    n_done = 0
    half = h / 2.0
    sixth = h / 6.0
    for n in range(steps):
        k1 = f(state)
        k2 = f([state[i] + half * k1[i] for i in range(dim)])
        k3 = f([state[i] + half * k2[i] for i in range(dim)])
        k4 = f([state[i] + h * k3[i] for i in range(dim)])
        state = [state[i] + sixth * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
                 for i in range(dim)]
        if not all(math.isfinite(v) and abs(v) < DIVERGENCE_LIMIT for v in state):
            completed = False
            break
        out[n + 1] = state
        n_done = n + 1
    states = out[: n_done + 1]
    times = np.arange(states.shape[0]) * h
    return Trajectory(times, states, h, completed)


# --- derivative estimation -----------------------------------------------------

@dataclass(frozen=True)
class TrajectoryDataset:
    states: np.ndarray
    derivs: np.ndarray
    times: np.ndarray
    noise_level: float

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def estimate_derivatives(traj: Trajectory, window: int = 7,
                         noise_level: float = 0.0, seed: int = 0) -> TrajectoryDataset:
    """Velocity targets from a local quadratic least-squares fit over a
    centered window (the derivative reduces to the symmetric slope filter,
    exact on polynomials of degree <= 2). Noise is applied to the states
    first: per-dimension uniform on [-level*span, +level*span]."""
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    states = traj.states.copy()
    n, dim = states.shape
    if n < window:
        raise ValueError("trajectory shorter than the window")
    if noise_level > 0:
        rng = np.random.default_rng(seed)
        for d in range(dim):
            span = float(np.max(states[:, d]) - np.min(states[:, d]))
            states[:, d] += rng.uniform(-noise_level * span, noise_level * span, size=n)
    m = window // 2
    dt = float(traj.times[1] - traj.times[0])
    offsets = np.arange(-m, m + 1)
    denom = float(np.sum(offsets ** 2)) * dt
    interior = np.arange(m, n - m)
    derivs = np.zeros((interior.size, dim))
    for j in offsets:
        derivs += j * states[m + j: m + j + interior.size]
    derivs /= denom
    return TrajectoryDataset(states[interior], derivs, traj.times[interior],
                             noise_level)


def make_trajectory_dataset(sys: OdeSystem, n_samples: int = 2000,
                            sample_every: int = 50, window: int = 7,
                            noise_level: float = 0.0, seed: int = 0,
                            transient: int | None = None) -> TrajectoryDataset:
    """Integrate past the transient, decimate, then differentiate."""
    transient = sys.transient_steps if transient is None else transient
    total = transient + n_samples * sample_every
    traj = integrate(sys, steps=total)
    if not traj.completed:
        raise RuntimeError(f"{sys.name}: trajectory diverged during sampling")
    states = traj.states[transient::sample_every]
    times = traj.times[transient::sample_every]
    sub = Trajectory(times, states, sys.h * sample_every, True)
    return estimate_derivatives(sub, window, noise_level, seed)


def dimension_dataset(td: TrajectoryDataset, j: int, name: str = "dynsys") -> Dataset:
    spec = SamplingSpec(UNIFORM, float(np.min(td.states)),
                        float(np.max(td.states)) + 1e-9,
                        td.states.shape[0], td.dim, 0)
    return Dataset(td.states, td.derivs[:, j], f"{name}[{j}]", 0, td.noise_level, spec)


# --- fitting -------------------------------------------------------------------

def refit_vector_field(td: TrajectoryDataset, trees: tuple[ExprTree, ...],
                       cfg: OptConfig = OptConfig(max_iters=100, restarts=1)) -> list[ExprTree]:
    """True-structure mode: keep each dimension's tree, refit its constants."""
    out = []
    for j, t in enumerate(trees):
        ds = dimension_dataset(td, j)
        fitted, _ = optimize_constants(t, ds, cfg)
        out.append(fitted)
    return out


def fit_vector_field(td: TrajectoryDataset, engine_cfg) -> list[ExprTree]:
    """Search mode: one evolutionary run per state dimension."""
    from .engine import evolve
    from .tree import parse_expr as _parse
    out = []
    for j in range(td.dim):
        ds = dimension_dataset(td, j)
        rec = evolve(ds, engine_cfg)
        out.append(_parse(rec.best_expression))
    return out


def r2_per_dimension(td: TrajectoryDataset, field) -> tuple[np.ndarray, float]:
    """Column-wise coefficient of determination of the learned field against
    the velocity targets, plus the mean over dimensions."""
    scores = np.empty(td.dim)
    for j in range(td.dim):
        yhat = eval_tree(field[j], td.states)
        scores[j] = r_squared(td.derivs[:, j], yhat)
    finite = scores[np.isfinite(scores)]
    return scores, float(np.mean(finite)) if finite.size else float("-inf")


def rollout_r2(traj: Trajectory, field, K: int = 50, n_starts: int = 20) -> float:
    """Average R² between K-step integrations of the field (each restarted
    from the true state) and the true segments, averaged over dimensions
    and starting points."""
    states = traj.states
    n, dim = states.shape
    if n <= K + 1:
        raise ValueError("trajectory too short for the rollout horizon")
    starts = np.linspace(0, n - K - 2, n_starts).astype(int)
    scores = []
    for i in starts:
        pred = integrate(tuple(field), x0=states[i], h=traj.h, steps=K)
        if pred.states.shape[0] < K + 1:
            scores.append(float("-inf"))
            continue
        per_dim = []
        for d in range(dim):
            r2 = r_squared(states[i:i + K + 1, d], pred.states[:, d])
            if math.isfinite(r2):
                per_dim.append(r2)
        scores.append(float(np.mean(per_dim)) if per_dim else float("-inf"))
    finite = [s for s in scores if math.isfinite(s)]
    return float(np.mean(finite)) if finite else float("-inf")


# --- export --------------------------------------------------------------------

def trajectory_to_csv(traj: Trajectory, path, derivs: np.ndarray | None = None) -> None:
    dim = traj.states.shape[1]
    cols = ["t"] + [f"x{i + 1}" for i in range(dim)]
    if derivs is not None:
        cols += [f"dx{i + 1}" for i in range(dim)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(traj.states.shape[0]):
            row = [repr(float(traj.times[i]))]
            row += [repr(float(v)) for v in traj.states[i]]
            if derivs is not None:
                row += [repr(float(v)) for v in derivs[i]]
            fh.write(",".join(row) + "\n")


def results_to_json(name: str, per_dim: np.ndarray, r2_mean: float,
                    r2_roll: float) -> str:
    return json.dumps({
        "name": name,
        "per_dim_r2": [float(v) for v in per_dim],
        "r2_mean": float(r2_mean),
        "r2_roll_50": float(r2_roll),
    }, indent=2, sort_keys=True)
