"""Evolutionary search loop with guided mutation/crossover, plus the
Monte-Carlo simulator for the success-probability waiting-time laws."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .bfgs import OptConfig, optimize_constants
from .datasets import Dataset, summarize
from .errors import InvalidProbability
from .evaluate import Fitness, fitness
from .generate import random_tree
from .guidance import GREEDY, CrossoverQuery, Guide, MutationQuery, UniformGuide, fill_masks
from .tree import ExprTree, decode, format_expr, linearize, mask, swap_subtrees
from .vocab import SEP_TOKEN


@dataclass(frozen=True)
class EngineConfig:
    population: int = 500
    generations: int = 60
    mask_rate: float = 0.15
    crossover_rate: float = 0.5
    elite: int = 20
    max_nodes: int = 60
    mutation_guide: Optional[Guide] = None   # None -> UniformGuide
    crossover_guide: Optional[Guide] = None
    fill_policy: str = GREEDY       # mask filling: argmax or per-mask sampling
    crossover_policy: str = GREEDY  # root choice: argmax or draw from (pa, pb)
    seed: int = 0
    early_stop_r2: Optional[float] = 1.0 - 1e-9
    mutation_prob: float = 1.0  # per-individual chance of undergoing mutation
    const_opt: OptConfig = field(default_factory=lambda: OptConfig(max_iters=15, restarts=1))
    jobs: int = 1

    def __post_init__(self):
        if not 0 <= self.mask_rate <= 1:
            raise ValueError("mask_rate must be in [0, 1]")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover_rate must be in [0, 1]")
        if not 0 <= self.elite < self.population:
            raise ValueError("elite size must be < population")


@dataclass
class GenStats:
    gen: int
    best_r2: float        # running best (non-decreasing)
    gen_best_r2: float
    best_nodes: int
    mean_r2: float
    mut_successes: int
    mut_attempts: int
    cross_successes: int
    cross_attempts: int
    wall_ms: float

    @property
    def alpha_hat(self) -> float:
        return self.mut_successes / self.mut_attempts if self.mut_attempts else 0.0

    @property
    def beta_hat(self) -> float:
        return self.cross_successes / self.cross_attempts if self.cross_attempts else 0.0


@dataclass
class RunRecord:
    task: str
    generations: list[GenStats]
    best_expression: str
    best_r2: float
    best_mse: float
    best_nodes: int
    solved_generation: Optional[int]
    mutation_guide: str
    crossover_guide: str
    seed: int
    wall_ms: float

    @property
    def mut_success_rate(self) -> float:
        s = sum(g.mut_successes for g in self.generations)
        a = sum(g.mut_attempts for g in self.generations)
        return s / a if a else 0.0

    @property
    def cross_success_rate(self) -> float:
        s = sum(g.cross_successes for g in self.generations)
        a = sum(g.cross_attempts for g in self.generations)
        return s / a if a else 0.0

    def to_dict(self, timestamps: bool = False) -> dict:
        out = {
            "task": self.task,
            "seed": self.seed,
            "best_expression": self.best_expression,
            "best_r2": self.best_r2,
            "best_mse": self.best_mse,
            "best_nodes": self.best_nodes,
            "solved_generation": self.solved_generation,
            "mutation_guide": self.mutation_guide,
            "crossover_guide": self.crossover_guide,
            "mutation_success_rate": self.mut_success_rate,
            "crossover_success_rate": self.cross_success_rate,
            "generations": [
                {
                    "gen": g.gen,
                    "best_r2": g.best_r2,
                    "gen_best_r2": g.gen_best_r2,
                    "best_nodes": g.best_nodes,
                    "mean_r2": g.mean_r2,
                    "mut_successes": g.mut_successes,
                    "mut_attempts": g.mut_attempts,
                    "cross_successes": g.cross_successes,
                    "cross_attempts": g.cross_attempts,
                }
                for g in self.generations
            ],
        }
        if timestamps:
            out["wall_ms"] = self.wall_ms
            out["gen_wall_ms"] = [g.wall_ms for g in self.generations]
        return out

    def to_json(self, timestamps: bool = False) -> str:
        return json.dumps(self.to_dict(timestamps), indent=2, sort_keys=True)

    def csv_rows(self, timestamps: bool = False) -> list[str]:
        """Per-generation rows: gen, best_r2, best_nodes, mean_r2, alpha_hat
        (mutation success rate), beta_hat (crossover success rate), wall_ms."""
        rows = ["gen,best_r2,best_nodes,mean_r2,alpha_hat,beta_hat,wall_ms"]
        for g in self.generations:
            wall = repr(g.wall_ms) if timestamps else "0"
            rows.append(f"{g.gen},{g.best_r2!r},{g.best_nodes},{g.mean_r2!r},"
                        f"{g.alpha_hat!r},{g.beta_hat!r},{wall}")
        return rows


def init_population(n: int, max_nodes: int, dims: int, seed: int) -> list[ExprTree]:
    """Random trees via the grow method; each contains at least one variable."""
    rng = np.random.default_rng(seed)
    return [random_tree(rng, max_nodes, dims) for _ in range(n)]


class _Evaluator:
    """Caches raw fitness and constant-refit results per token sequence."""

    def __init__(self, ds: Dataset, const_cfg: OptConfig, jobs: int = 1):
        self.ds = ds
        self.const_cfg = const_cfg
        self.jobs = max(1, jobs)
        self.raw_cache: dict = {}
        self.opt_cache: dict = {}

    def raw(self, t: ExprTree) -> Fitness:
        key = linearize(t)
        hit = self.raw_cache.get(key)
        if hit is None:
            hit = fitness(t, self.ds)
            self.raw_cache[key] = hit
        return hit

    def refit(self, t: ExprTree) -> tuple[ExprTree, Fitness]:
        key = linearize(t)
        hit = self.opt_cache.get(key)
        if hit is None:
            hit = optimize_constants(t, self.ds, self.const_cfg)
            self.opt_cache[key] = hit
        return hit

    def refit_all(self, trees: list[ExprTree]) -> list[tuple[ExprTree, Fitness]]:
        if self.jobs == 1:
            return [self.refit(t) for t in trees]
        missing = {}
        for t in trees:
            key = linearize(t)
            if key not in self.opt_cache and key not in missing:
                missing[key] = t
        items = list(missing.values())
        with ThreadPoolExecutor(max_workers=self.jobs) as ex:
            results = list(ex.map(
                lambda t: optimize_constants(t, self.ds, self.const_cfg), items))
        for t, res in zip(items, results):
            self.opt_cache[linearize(t)] = res
        return [self.opt_cache[linearize(t)] for t in trees]


def mutation_step(pop: list[ExprTree], guide: Guide, rho: float, policy: str,
                  rng: np.random.Generator, ds: Dataset, ev: _Evaluator,
                  summary: np.ndarray, mutation_prob: float = 1.0):
    """Guided mask-and-fill on each individual; rho = 0 disables mutation.

    Success counters compare raw (pre constant-refit) offspring fitness with
    the parent's, per the measured-success instrumentation.
    """
    if rho <= 0:
        return list(pop), 0, 0
    out = []
    successes = 0
    attempts = 0
    for t in pop:
        if mutation_prob < 1.0 and rng.random() >= mutation_prob:
            out.append(t)
            continue
        seq = linearize(t)
        positions = [i for i in range(len(seq)) if rng.random() < rho]
        if not positions:
            positions = [int(rng.integers(len(seq)))]
        q = MutationQuery(mask(seq, positions), summary)
        r = guide.guide_mutation(q)
        filled = fill_masks(q, r, policy, int(rng.integers(2 ** 31)))
        child = decode(filled)
        attempts += 1
        if ev.raw(child).r2 > ev.raw(t).r2:
            successes += 1
        out.append(child)
    return out, successes, attempts


def crossover_step(pop: list[ExprTree], guide: Guide, gamma: float,
                   rng: np.random.Generator, ds: Dataset, ev: _Evaluator,
                   max_nodes: int, summary: np.ndarray, policy: str = GREEDY):
    """Guided subtree exchange over disjoint random pairs.

    Root positions take the response argmax under the greedy policy and are
    drawn from the response distributions under the sampling policy (the
    unguided baseline). Returns the offspring list (empty for gamma = 0)
    plus success counters; size-policy rejections return the parent and
    count as failures.
    """
    n = len(pop)
    n_pairs = int(gamma * n / 2)
    if n_pairs == 0:
        return [], 0, 0
    order = rng.permutation(n)
    offspring: list[ExprTree] = []
    successes = 0
    attempts = 0
    for p in range(n_pairs):
        a = pop[int(order[2 * p])]
        b = pop[int(order[2 * p + 1])]
        q = CrossoverQuery(linearize(a) + (SEP_TOKEN,) + linearize(b), summary)
        r = guide.guide_crossover(q)
        if policy == GREEDY:
            i_star = int(np.argmax(r.pa))
            j_star = int(np.argmax(r.pb))
        else:
            i_star = int(rng.choice(len(r.pa), p=r.pa / np.sum(r.pa)))
            j_star = int(rng.choice(len(r.pb), p=r.pb / np.sum(r.pb)))
        res = swap_subtrees(a, i_star, b, j_star, max_nodes)
        attempts += 1
        parent_best = max(ev.raw(a).r2, ev.raw(b).r2)
        child_best = max(ev.raw(res.first).r2, ev.raw(res.second).r2)
        if child_best > parent_best:
            successes += 1
        offspring.extend([res.first, res.second])
    return offspring, successes, attempts


def evolve(ds: Dataset, cfg: EngineConfig) -> RunRecord:
    """Run the full loop: guided mutation of every individual, guided
    crossover on a gamma-fraction of pairs, population resize, constant
    refit, fitness, elitist selection; early-stops at cfg.early_stop_r2."""
    mut_guide = cfg.mutation_guide if cfg.mutation_guide is not None else UniformGuide()
    cross_guide = cfg.crossover_guide if cfg.crossover_guide is not None else UniformGuide()
    rng = np.random.default_rng(cfg.seed)
    summary = summarize(ds)
    ev = _Evaluator(ds, replace(cfg.const_opt, seed=cfg.seed), cfg.jobs)

    pop = init_population(cfg.population, cfg.max_nodes, ds.dims, cfg.seed)
    current: list[tuple[ExprTree, Fitness]] = []
    best_tree: Optional[ExprTree] = None
    best_fit = Fitness(float("-inf"), float("inf"), 0)
    elites: list[tuple[ExprTree, Fitness]] = []
    stats: list[GenStats] = []
    solved: Optional[int] = None
    t_run = time.perf_counter()

    for gen in range(1, cfg.generations + 1):
        t0 = time.perf_counter()
        mutated, ms, ma = mutation_step(pop, mut_guide, cfg.mask_rate,
                                        cfg.fill_policy, rng, ds, ev, summary,
                                        cfg.mutation_prob)
        offspring, xs, xa = crossover_step(mutated, cross_guide, cfg.crossover_rate,
                                           rng, ds, ev, cfg.max_nodes, summary,
                                           cfg.crossover_policy)
        if len(offspring) < cfg.population:
            ranked = sorted(mutated, key=lambda t: (-ev.raw(t).r2, t.node_count))
            resized = offspring + ranked[: cfg.population - len(offspring)]
        else:
            resized = offspring[: cfg.population]

        evaluated = ev.refit_all(resized)
        for t, f in evaluated:
            if f.r2 > best_fit.r2 or (f.r2 == best_fit.r2 and f.nodes < best_fit.nodes):
                best_tree, best_fit = t, f

        # Plus-selection over old and new candidates; duplicates (by token
        # sequence) are dropped so the next population stays diverse.
        pool = evaluated + current + elites
        pool.sort(key=lambda tf: (-tf[1].r2, tf[1].nodes))
        distinct: list[tuple[ExprTree, Fitness]] = []
        seen_keys = set()
        for t, f in pool:
            key = linearize(t)
            if key in seen_keys:
                continue
            seen_keys.add(key)
            distinct.append((t, f))
            if len(distinct) >= cfg.population:
                break
        n_distinct = len(distinct)
        idx = 0
        while len(distinct) < cfg.population:
            distinct.append(distinct[idx % n_distinct])
            idx += 1
        elites = distinct[: cfg.elite]
        current = distinct
        pop = [t for t, _ in distinct]
        assert len(pop) == cfg.population, "population size drifted"
        if stats:
            assert best_fit.r2 >= stats[-1].best_r2, "best fitness regressed"

        finite = [f.r2 for _, f in evaluated if math.isfinite(f.r2)]
        mean_r2 = float(np.mean(finite)) if finite else float("-inf")
        stats.append(GenStats(gen, best_fit.r2, max((f.r2 for _, f in evaluated),
                                                    default=float("-inf")),
                              best_fit.nodes, mean_r2, ms, ma, xs, xa,
                              (time.perf_counter() - t0) * 1e3))
        if cfg.early_stop_r2 is not None and best_fit.r2 >= cfg.early_stop_r2:
            solved = gen
            break

    return RunRecord(
        task=ds.task_name,
        generations=stats,
        best_expression=format_expr(best_tree) if best_tree is not None else "",
        best_r2=best_fit.r2,
        best_mse=best_fit.mse,
        best_nodes=best_fit.nodes,
        solved_generation=solved,
        mutation_guide=mut_guide.name,
        crossover_guide=cross_guide.name,
        seed=cfg.seed,
        wall_ms=(time.perf_counter() - t_run) * 1e3,
    )


# --- efficiency-law simulator ------------------------------------------------

@dataclass(frozen=True)
class EfficiencyTrial:
    alpha: float
    beta: float
    lam: int = 4
    k: int = 1
    trials: int = 100_000
    seed: int = 0
    alpha_c: Optional[float] = None
    beta_c: Optional[float] = None
    n_mut: Optional[int] = None
    n_cross: Optional[int] = None

    def __post_init__(self):
        for name in ("alpha", "beta", "alpha_c", "beta_c"):
            v = getattr(self, name)
            if v is not None and not 0.0 < v < 1.0:
                raise InvalidProbability(f"{name}={v} outside (0, 1)")
        if self.lam < 1 or self.k < 1 or self.trials < 1:
            raise InvalidProbability("lam, k and trials must be positive")


def simulate_efficiency(trial: EfficiencyTrial) -> dict:
    """Monte-Carlo check of the one-generation improvement probability
    1-(1-p)^lam, the waiting time E[T] = k/p, and the joint-guidance
    inequality, each with 3-sigma bands."""
    rng = np.random.default_rng(trial.seed)
    report: dict = {"trial": {
        "alpha": trial.alpha, "beta": trial.beta, "lam": trial.lam,
        "k": trial.k, "trials": trial.trials, "seed": trial.seed,
    }}

    def one_gen(p: float) -> dict:
        hits = (rng.random((trial.trials, trial.lam)) < p).any(axis=1)
        emp = float(np.mean(hits))
        closed = 1.0 - (1.0 - p) ** trial.lam
        se = math.sqrt(max(closed * (1 - closed), 1e-300) / trial.trials)
        return {"closed_form": closed, "empirical": emp, "sigma": se,
                "within_3_sigma": abs(emp - closed) <= 3 * se + 1e-12}

    def waiting(p: float) -> dict:
        draws = rng.negative_binomial(trial.k, p, size=trial.trials) + trial.k
        emp = float(np.mean(draws))
        closed = trial.k / p
        se = math.sqrt(trial.k * (1 - p)) / p / math.sqrt(trial.trials)
        return {"closed_form": closed, "empirical": emp, "sigma": se,
                "within_3_sigma": abs(emp - closed) <= 3 * se + 1e-12}

    report["p_improve"] = {"random": one_gen(trial.alpha), "guided": one_gen(trial.beta)}
    report["waiting_time"] = {"random": waiting(trial.alpha), "guided": waiting(trial.beta)}

    am, bm = trial.alpha, trial.beta
    ac = trial.alpha_c if trial.alpha_c is not None else trial.alpha
    bc = trial.beta_c if trial.beta_c is not None else trial.beta
    nm = trial.n_mut if trial.n_mut is not None else trial.lam
    nc = trial.n_cross if trial.n_cross is not None else trial.lam

    def joint(pm, pc) -> dict:
        mut = (rng.random((trial.trials, nm)) < pm).any(axis=1)
        cro = (rng.random((trial.trials, nc)) < pc).any(axis=1)
        emp = float(np.mean(mut | cro))
        closed = 1.0 - (1.0 - pm) ** nm * (1.0 - pc) ** nc
        return {"closed_form": closed, "empirical": emp}

    rand = joint(am, ac)
    guided = joint(bm, bc)
    report["joint"] = {
        "random": rand,
        "guided": guided,
        "guided_exceeds_random": guided["empirical"] > rand["empirical"]
        if (bm > am or bc > ac) else guided["empirical"] >= rand["empirical"],
    }
    return report
