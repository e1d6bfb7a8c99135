import json

import numpy as np
import pytest

from gesr.bfgs import OptConfig
from gesr.datasets import SamplingSpec, sample_expression, summarize
from gesr.engine import (
    EfficiencyTrial, EngineConfig, _Evaluator, crossover_step, evolve,
    init_population, mutation_step, simulate_efficiency,
)
from gesr.errors import InvalidProbability
from gesr.guidance import GREEDY, SAMPLE, UniformGuide
from gesr.tree import linearize, parse_expr
from gesr.vocab import VARIABLE


def _ds(expr="x1", rows=25, dims=1, seed=3, low=-1.0, high=1.0):
    return sample_expression(parse_expr(expr), SamplingSpec("U", low, high, rows, dims, seed))


def _cfg(**kw):
    base = dict(population=30, generations=8, seed=0, elite=3,
                fill_policy=SAMPLE, crossover_policy=SAMPLE,
                const_opt=OptConfig(max_iters=8, restarts=1))
    base.update(kw)
    return EngineConfig(**base)


def test_trivial_target_solves_in_generation_one():
    ds = _ds("x1", rows=30)
    rec = evolve(ds, _cfg(population=60))
    assert rec.solved_generation == 1
    assert rec.best_r2 >= 1.0 - 1e-9


def test_no_variation_operators_plateau():
    ds = _ds("(add (mul x1 x1) x1)")
    rec = evolve(ds, _cfg(mask_rate=0.0, crossover_rate=0.0, early_stop_r2=None))
    values = [g.best_r2 for g in rec.generations]
    assert all(v == values[0] for v in values)


def test_init_population_valid_and_reproducible():
    pop = init_population(200, 20, 2, seed=4)
    assert len(pop) == 200
    for t in pop:
        assert 1 <= t.node_count <= 20
        assert any(tok.kind == VARIABLE for tok in linearize(t))
    again = init_population(200, 20, 2, seed=4)
    assert [linearize(t) for t in pop] == [linearize(t) for t in again]
    other = init_population(200, 20, 2, seed=5)
    assert [linearize(t) for t in pop] != [linearize(t) for t in other]


def test_mutation_step_counters_and_full_mask():
    ds = _ds("(add x1 (mul x1 x1))")
    ev = _Evaluator(ds, OptConfig(max_iters=5, restarts=1))
    summary = summarize(ds)
    pop = init_population(20, 12, 1, seed=1)
    rng = np.random.default_rng(0)
    out, succ, att = mutation_step(pop, UniformGuide(), 0.15, SAMPLE, rng, ds, ev, summary)
    assert len(out) == 20 and 0 <= succ <= att <= 20
    # rho -> 1 masks every position; greedy uniform fill is deterministic,
    # so identical parents give identical offspring
    clones = [pop[0]] * 5
    rng = np.random.default_rng(1)
    out2, _, _ = mutation_step(clones, UniformGuide(), 1.0, GREEDY, rng, ds, ev, summary)
    assert all(linearize(t) == linearize(out2[0]) for t in out2)


def test_mutation_step_rho_zero_is_identity():
    ds = _ds()
    ev = _Evaluator(ds, OptConfig(max_iters=5, restarts=1))
    pop = init_population(10, 10, 1, seed=2)
    out, succ, att = mutation_step(pop, UniformGuide(), 0.0, SAMPLE,
                                   np.random.default_rng(0), ds, ev, summarize(ds))
    assert out == pop and succ == 0 and att == 0


def test_crossover_step_gamma_zero_and_size_invariant():
    ds = _ds()
    ev = _Evaluator(ds, OptConfig(max_iters=5, restarts=1))
    summary = summarize(ds)
    pop = init_population(21, 10, 1, seed=3)
    out, succ, att = crossover_step(pop, UniformGuide(), 0.0,
                                    np.random.default_rng(0), ds, ev, 60, summary)
    assert out == [] and succ == 0 and att == 0
    for gamma in (0.25, 0.5, 1.0):
        off, _, att = crossover_step(pop, UniformGuide(), gamma,
                                     np.random.default_rng(1), ds, ev, 60, summary,
                                     policy=SAMPLE)
        assert len(off) == 2 * int(gamma * len(pop) / 2)
        assert att == int(gamma * len(pop) / 2)


def test_generations_all_recorded_without_early_stop():
    ds = _ds("(mul x1 x1)")
    rec = evolve(ds, _cfg(generations=5, early_stop_r2=None))
    assert len(rec.generations) == 5
    assert [g.gen for g in rec.generations] == [1, 2, 3, 4, 5]


def test_evolve_deterministic():
    ds = _ds("(add (sin x1) x1)", rows=30)
    cfg = _cfg(generations=6, seed=11, early_stop_r2=None)
    a = evolve(ds, cfg)
    b = evolve(ds, cfg)
    assert a.to_json(timestamps=False) == b.to_json(timestamps=False)


def test_evolve_monotone_best():
    ds = _ds("(add (mul x1 x1) (sin x1))", rows=30)
    rec = evolve(ds, _cfg(generations=10, early_stop_r2=None))
    values = [g.best_r2 for g in rec.generations]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_run_record_exports():
    ds = _ds("(mul x1 x1)")
    rec = evolve(ds, _cfg(generations=3, early_stop_r2=None))
    rows = rec.csv_rows()
    assert rows[0] == "gen,best_r2,best_nodes,mean_r2,alpha_hat,beta_hat,wall_ms"
    assert len(rows) == 4
    obj = json.loads(rec.to_json())
    assert set(obj) >= {"task", "best_expression", "best_r2", "generations",
                        "solved_generation"}
    assert "wall_ms" not in obj  # timestamps excluded by default


def test_jobs_parallel_matches_serial():
    ds = _ds("(add (mul x1 x1) x1)", rows=30)
    a = evolve(ds, _cfg(generations=4, early_stop_r2=None, jobs=1))
    b = evolve(ds, _cfg(generations=4, early_stop_r2=None, jobs=4))
    assert a.to_json() == b.to_json()


def test_engine_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(population=10, elite=10)
    with pytest.raises(ValueError):
        EngineConfig(mask_rate=1.5)


# --- efficiency simulator ----------------------------------------------------

def test_efficiency_closed_forms():
    trial = EfficiencyTrial(alpha=0.25, beta=0.5, lam=4, k=2, trials=40000, seed=1)
    rep = simulate_efficiency(trial)
    assert rep["p_improve"]["random"]["closed_form"] == pytest.approx(0.68359375)
    assert rep["waiting_time"]["guided"]["closed_form"] == pytest.approx(4.0)
    assert rep["waiting_time"]["random"]["closed_form"] == pytest.approx(8.0)
    for side in ("random", "guided"):
        assert rep["p_improve"][side]["within_3_sigma"]
        assert rep["waiting_time"][side]["within_3_sigma"]
    assert rep["joint"]["guided_exceeds_random"]


def test_efficiency_degenerate_equal_probabilities():
    trial = EfficiencyTrial(alpha=0.3, beta=0.3, lam=4, k=1, trials=20000, seed=2)
    rep = simulate_efficiency(trial)
    assert (rep["p_improve"]["random"]["closed_form"]
            == rep["p_improve"]["guided"]["closed_form"])


def test_efficiency_validates_probabilities():
    with pytest.raises(InvalidProbability):
        EfficiencyTrial(alpha=0.0, beta=0.5)
    with pytest.raises(InvalidProbability):
        EfficiencyTrial(alpha=0.2, beta=1.0)
