"""Command-line interface: run, bench, collect-pairs, train-editor, dynsys,
efficiency. All outputs are deterministic given --seed (timestamps are only
written when --timestamps is passed); exit codes: 0 ok, 2 usage, 3 I/O,
4 internal invariant violation."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bfgs import OptConfig
from .datasets import (
    add_noise, dataset_from_csv, registry_by_name, registry_to_json, sample,
    suite_tasks, suites,
)
from .distance import ned
from .engine import EfficiencyTrial, EngineConfig, evolve, simulate_efficiency
from .errors import GesrError
from .evaluate import is_recovered
from .guidance import (
    GREEDY, SAMPLE, LearnedGuide, OracleGuide, PairGenConfig, UniformGuide,
    collect_crossover_pairs, collect_mutation_pairs, load_crossover_pairs,
    load_mutation_pairs, save_crossover_pairs, save_mutation_pairs,
    train_learned_editor, editor_top1_accuracy,
)
from .tree import parse_expr
from . import dynsys as dynsys_mod

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

MODES = ("no_guide", "mutation_only", "mutation_and_crossover")


def _default_seed() -> int:
    env = os.environ.get("GESR_SEED")
    return int(env) if env else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gesr",
                                description="symbolic regression engine and harnesses")
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.add_argument("--dump-config", action="store_true",
                   help="print the effective config and exit")
    sub = p.add_subparsers(dest="command")

    run = sub.add_parser("run", help="search one task or CSV dataset")
    _engine_args(run)
    run.add_argument("--task", help="registry task name")
    run.add_argument("--data", help="CSV dataset (header x1,...,xd,y)")
    run.add_argument("--repeat", type=int, default=1)
    run.add_argument("--noise", type=float, default=0.0)

    bench = sub.add_parser("bench", help="run a whole suite")
    _engine_args(bench)
    bench.add_argument("--suite", required=True, help="|".join(suites()))
    bench.add_argument("--repeat", type=int, default=1)
    bench.add_argument("--noise", type=float, default=0.0)
    bench.add_argument("--modes", nargs="+", default=["no_guide"], choices=MODES)

    col = sub.add_parser("collect-pairs", help="harvest editor training pairs")
    _common_args(col)
    col.add_argument("--kind", choices=("mutation", "crossover"), default="mutation")
    col.add_argument("--n", type=int, default=1000)
    col.add_argument("--dims", type=int, default=1)
    col.add_argument("--rows", type=int, default=20)
    col.add_argument("--low", type=float, default=-1.0)
    col.add_argument("--high", type=float, default=1.0)
    col.add_argument("--tree-nodes", type=int, default=10)

    tr = sub.add_parser("train-editor", help="fit the learned editor on pair files")
    _common_args(tr)
    tr.add_argument("--pairs", required=True, help="mutation-pair ndjson")
    tr.add_argument("--xpairs", help="crossover-pair ndjson")
    tr.add_argument("--data-dir", help="dataset CSV directory (default: out dir)")
    tr.add_argument("--holdout", type=float, default=0.1)

    dyn = sub.add_parser("dynsys", help="chaotic vector-field pipeline")
    _common_args(dyn)
    dyn.add_argument("--system", default="all")
    dyn.add_argument("--mode", choices=("refit", "search"), default="refit")
    dyn.add_argument("--noise", type=float, default=0.02)
    dyn.add_argument("--samples", type=int, default=1500)
    dyn.add_argument("--sample-every", type=int, default=5)
    dyn.add_argument("--window", type=int, default=61)
    dyn.add_argument("--rollout", type=int, default=50)

    eff = sub.add_parser("efficiency", help="verify the waiting-time laws")
    _common_args(eff)
    eff.add_argument("--alpha", type=float, default=0.1)
    eff.add_argument("--beta", type=float, default=0.3)
    eff.add_argument("--lam", type=int, default=4)
    eff.add_argument("--k", type=int, default=3)
    eff.add_argument("--trials", type=int, default=100000)
    return p


def _common_args(sp) -> None:
    # defaults suppressed so a subcommand flag never clobbers the top-level one
    sp.add_argument("--config", default=argparse.SUPPRESS,
                    help="JSON config file; explicit flags win")
    sp.add_argument("--dump-config", action="store_true", default=argparse.SUPPRESS,
                    help="print the effective config and exit")
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--out", default="gesr-out")
    sp.add_argument("--timestamps", action="store_true",
                    help="include wall-clock fields in artifacts")
    sp.add_argument("--no-timestamps", dest="timestamps", action="store_false")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(timestamps=False)


def _engine_args(sp) -> None:
    _common_args(sp)
    sp.add_argument("--mode", choices=MODES, default="no_guide")
    sp.add_argument("--guide", choices=("oracle", "learned"), default="oracle",
                    help="guide used by the guided modes")
    sp.add_argument("--editor", help="learned-editor snapshot path")
    sp.add_argument("--population", type=int, default=500)
    sp.add_argument("--generations", type=int, default=60)
    sp.add_argument("--mask-rate", type=float, default=0.15)
    sp.add_argument("--crossover-rate", type=float, default=0.5)
    sp.add_argument("--elite", type=int, default=20)
    sp.add_argument("--max-nodes", type=int, default=60)
    sp.add_argument("--fill-policy", choices=(GREEDY, SAMPLE), default=None)
    sp.add_argument("--early-stop", type=float, default=1.0 - 1e-9)
    sp.add_argument("--const-iters", type=int, default=15)
    sp.add_argument("--const-restarts", type=int, default=1)


def _merge_config(argv, parser):
    """defaults < config file < explicit flags."""
    ns = parser.parse_args(argv)
    if not getattr(ns, "config", None):
        return ns
    with open(ns.config, "r", encoding="utf-8") as fh:
        file_cfg = json.load(fh)
    sentinel = argparse.ArgumentParser(prog="gesr", argument_default=argparse.SUPPRESS)
    sentinel.add_argument("--config")
    sentinel.add_argument("--dump-config", action="store_true")
    ssub = sentinel.add_subparsers(dest="command")
    for name in ("run", "bench", "collect-pairs", "train-editor", "dynsys", "efficiency"):
        sp = ssub.add_parser(name, argument_default=argparse.SUPPRESS)
        template = build_parser()
        for action in _sub_actions(template, name):
            kwargs = {"default": argparse.SUPPRESS}
            if action.option_strings:
                if isinstance(action, argparse._StoreTrueAction):
                    sp.add_argument(*action.option_strings, action="store_true",
                                    **kwargs)
                elif isinstance(action, argparse._StoreFalseAction):
                    sp.add_argument(*action.option_strings, action="store_false",
                                    dest=action.dest, **kwargs)
                else:
                    sp.add_argument(*action.option_strings, dest=action.dest,
                                    type=action.type, nargs=action.nargs, **kwargs)
    explicit = vars(sentinel.parse_args(argv))
    merged = vars(ns).copy()
    for k, v in file_cfg.items():
        key = k.replace("-", "_")
        if key in merged:
            merged[key] = v
    merged.update(explicit)
    return argparse.Namespace(**merged)


def _sub_actions(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]._actions[1:]  # skip help
    return []


def _effective_config(ns) -> dict:
    skip = {"config", "dump_config", "command"}
    return {k: v for k, v in sorted(vars(ns).items()) if k not in skip}


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _make_guides(ns, ds):
    """Wire the ablation mode to guide objects and choice policies."""
    mode = ns.mode
    if ns.guide == "learned":
        if not ns.editor:
            raise ValueError("--guide learned requires --editor")
        guided = LearnedGuide.load(ns.editor)
    else:
        guided = OracleGuide(ds, max_nodes=ns.max_nodes)
    uniform = UniformGuide()
    fill = ns.fill_policy
    if mode == "no_guide":
        return uniform, uniform, fill or SAMPLE, SAMPLE
    if mode == "mutation_only":
        return guided, uniform, fill or SAMPLE, SAMPLE
    return guided, guided, fill or GREEDY, GREEDY


def _engine_config(ns, ds, seed) -> EngineConfig:
    mut, cross, fill, cross_policy = _make_guides(ns, ds)
    return EngineConfig(
        population=ns.population,
        generations=ns.generations,
        mask_rate=ns.mask_rate,
        crossover_rate=ns.crossover_rate,
        elite=ns.elite,
        max_nodes=ns.max_nodes,
        mutation_guide=mut,
        crossover_guide=cross,
        fill_policy=fill,
        crossover_policy=cross_policy,
        seed=seed,
        early_stop_r2=ns.early_stop,
        const_opt=OptConfig(max_iters=ns.const_iters, restarts=ns.const_restarts,
                            seed=seed),
        jobs=ns.jobs,
    )


def _load_run_dataset(ns, seed):
    if ns.task:
        task = registry_by_name().get(ns.task)
        if task is None:
            raise ValueError(f"unknown task {ns.task!r}")
        ds = sample(task, seed=seed)
    elif ns.data:
        ds = dataset_from_csv(ns.data)
    else:
        raise ValueError("run needs --task or --data")
    if ns.noise:
        ds = add_noise(ds, ns.noise)
    return ds


def cmd_run(ns) -> int:
    rows = ["task,seed,best_r2,best_nodes,solved_generation,wall_ms"]
    agg = []
    for rep in range(ns.repeat):
        seed = ns.seed + rep
        ds = _load_run_dataset(ns, seed)
        rec = evolve(ds, _engine_config(ns, ds, seed))
        base = os.path.join(ns.out, f"run_{rec.task}_{seed}")
        _write(base + ".json", rec.to_json(ns.timestamps))
        _write(base + ".csv", "\n".join(rec.csv_rows(ns.timestamps)))
        _write(base + ".sexpr", rec.best_expression)
        wall = repr(rec.wall_ms) if ns.timestamps else "0"
        rows.append(f"{rec.task},{seed},{rec.best_r2!r},{rec.best_nodes},"
                    f"{'' if rec.solved_generation is None else rec.solved_generation},{wall}")
        agg.append(rec)
    if ns.repeat > 1:
        mean_r2 = float(np.mean([r.best_r2 for r in agg]))
        mean_nodes = float(np.mean([r.best_nodes for r in agg]))
        mean_ms = float(np.mean([r.wall_ms for r in agg])) if ns.timestamps else 0.0
        rows.append(f"aggregate,,{mean_r2!r},{mean_nodes!r},,{mean_ms!r}")
    _write(os.path.join(ns.out, "runs.csv"), "\n".join(rows))
    return EXIT_OK


def cmd_bench(ns) -> int:
    tasks = suite_tasks(ns.suite)
    header = ("suite,task,mode,mean_r2,mean_r2_clamped,std_r2,mean_nodes,"
              "recovery_rate,mean_ned,mean_time_s")
    rows = [header]
    for task in tasks:
        for mode in ns.modes:
            r2s, nodes, times, recov, neds = [], [], [], [], []
            for rep in range(ns.repeat):
                seed = ns.seed + rep
                ds = sample(task, seed=seed)
                if ns.noise:
                    ds = add_noise(ds, ns.noise)
                ns_mode = argparse.Namespace(**{**vars(ns), "mode": mode})
                rec = evolve(ds, _engine_config(ns_mode, ds, seed))
                r2s.append(rec.best_r2)
                nodes.append(rec.best_nodes)
                times.append(rec.wall_ms / 1e3)
                pred = parse_expr(rec.best_expression)
                recov.append(is_recovered(pred, task.target, ds))
                neds.append(ned(pred, task.target))
            mean_r2 = float(np.mean(r2s))
            clamped = float(np.mean([max(v, 0.0) for v in r2s]))
            rows.append(
                f"{task.suite},{task.name},{mode},{mean_r2!r},{clamped!r},"
                f"{float(np.std(r2s))!r},{float(np.mean(nodes))!r},"
                f"{float(np.mean(recov))!r},{float(np.mean(neds))!r},"
                f"{float(np.mean(times)) if ns.timestamps else 0.0!r}")
    _write(os.path.join(ns.out, f"bench_{ns.suite}.csv"), "\n".join(rows))
    _write(os.path.join(ns.out, "registry.json"), registry_to_json())
    return EXIT_OK


def cmd_collect(ns) -> int:
    gen = PairGenConfig(dims=ns.dims, rows=ns.rows, low=ns.low, high=ns.high,
                        max_nodes=ns.tree_nodes, seed=ns.seed)
    opt = OptConfig(max_iters=15, restarts=1, gtol=1e-5, seed=ns.seed)
    data_dir = os.path.join(ns.out, "datasets")
    if ns.kind == "mutation":
        pairs = collect_mutation_pairs(ns.n, gen, opt)
        save_mutation_pairs(pairs, os.path.join(ns.out, "mutation_pairs.ndjson"), data_dir)
    else:
        pairs = collect_crossover_pairs(ns.n, gen, opt)
        save_crossover_pairs(pairs, os.path.join(ns.out, "crossover_pairs.ndjson"), data_dir)
    _write(os.path.join(ns.out, "collect_summary.json"),
           json.dumps({"kind": ns.kind, "requested": ns.n, "collected": len(pairs)},
                      indent=2, sort_keys=True))
    return EXIT_OK


def cmd_train(ns) -> int:
    data_dir = ns.data_dir or os.path.join(os.path.dirname(ns.pairs), "datasets")
    pairs = load_mutation_pairs(ns.pairs, data_dir)
    xpairs = []
    if ns.xpairs:
        xdir = ns.data_dir or os.path.join(os.path.dirname(ns.xpairs), "datasets")
        xpairs = load_crossover_pairs(ns.xpairs, xdir)
    split = int(len(pairs) * (1.0 - ns.holdout))
    guide = train_learned_editor(pairs[:split], xpairs)
    acc = editor_top1_accuracy(guide, pairs[split:]) if split < len(pairs) else None
    os.makedirs(ns.out, exist_ok=True)
    out_path = os.path.join(ns.out, "editor.json")
    guide.save(out_path)
    _write(os.path.join(ns.out, "train_summary.json"),
           json.dumps({"pairs": len(pairs), "xpairs": len(xpairs),
                       "holdout_top1": acc, "editor": out_path},
                      indent=2, sort_keys=True))
    return EXIT_OK


def cmd_dynsys(ns) -> int:
    names = ([s.name for s in dynsys_mod.ode_registry()]
             if ns.system == "all" else [ns.system])
    for name in names:
        system = dynsys_mod.system_by_name(name)
        td = dynsys_mod.make_trajectory_dataset(
            system, n_samples=ns.samples, sample_every=ns.sample_every,
            window=ns.window, noise_level=ns.noise, seed=ns.seed)
        if ns.mode == "refit":
            field = dynsys_mod.refit_vector_field(td, system.rhs)
        else:
            cfg = EngineConfig(population=200, generations=30, seed=ns.seed,
                               fill_policy=SAMPLE, crossover_policy=SAMPLE,
                               early_stop_r2=0.999,
                               const_opt=OptConfig(max_iters=15, restarts=1))
            field = dynsys_mod.fit_vector_field(td, cfg)
        per_dim, mean = dynsys_mod.r2_per_dimension(td, field)
        traj = dynsys_mod.integrate(system, steps=ns.rollout * 40 + ns.rollout)
        roll = dynsys_mod.rollout_r2(traj, field, K=ns.rollout)
        _write(os.path.join(ns.out, f"dynsys_{name}.json"),
               dynsys_mod.results_to_json(name, per_dim, mean, roll))
        dynsys_mod.trajectory_to_csv(
            dynsys_mod.Trajectory(td.times, td.states, system.h * ns.sample_every, True),
            os.path.join(ns.out, f"dynsys_{name}_data.csv"), derivs=td.derivs)
    return EXIT_OK


def cmd_efficiency(ns) -> int:
    trial = EfficiencyTrial(alpha=ns.alpha, beta=ns.beta, lam=ns.lam, k=ns.k,
                            trials=ns.trials, seed=ns.seed)
    report = simulate_efficiency(trial)
    _write(os.path.join(ns.out, "efficiency.json"),
           json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "bench": cmd_bench,
    "collect-pairs": cmd_collect,
    "train-editor": cmd_train,
    "dynsys": cmd_dynsys,
    "efficiency": cmd_efficiency,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = _merge_config(argv, parser)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    except (OSError, json.JSONDecodeError) as e:
        print(f"gesr: {e}", file=sys.stderr)
        return EXIT_IO
    if getattr(ns, "dump_config", False):
        print(json.dumps(_effective_config(ns), indent=2, sort_keys=True, default=str))
        return EXIT_OK
    if not ns.command:
        parser.print_help()
        return EXIT_USAGE
    try:
        return COMMANDS[ns.command](ns)
    except (ValueError, GesrError) as e:
        print(f"gesr: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"gesr: {e}", file=sys.stderr)
        return EXIT_IO
    except AssertionError as e:  # internal invariant violations
        print(f"gesr: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
