"""Guided genetic programming for symbolic regression."""

from .bfgs import OptConfig, gradient, minimize, optimize_constants
from .datasets import (
    BenchmarkTask, Dataset, SamplingSpec, add_noise, registry, registry_by_name,
    sample, sample_expression, suite_tasks, suites, summarize,
)
from .distance import ned, tree_edit_distance
from .dynsys import (
    OdeSystem, Trajectory, TrajectoryDataset, estimate_derivatives,
    fit_vector_field, integrate, make_trajectory_dataset, ode_registry,
    r2_per_dimension, refit_vector_field, rollout_r2, system_by_name,
)
from .engine import (
    EfficiencyTrial, EngineConfig, RunRecord, evolve, init_population,
    simulate_efficiency,
)
from .evaluate import Fitness, eval_tree, fitness, is_recovered, mse, r_squared
from .generate import random_tree, select_mutation_nodes
from .guidance import (
    CrossoverPair, CrossoverQuery, CrossoverResponse, LearnedGuide,
    MutationPair, MutationQuery, MutationResponse, OracleGuide, PairGenConfig,
    UniformGuide, collect_crossover_pairs, collect_mutation_pairs,
    editor_top1_accuracy, fill_masks, guide_crossover, guide_mutation,
    train_learned_editor,
)
from .relax import (
    RelaxedExpr, discretize, eval_relaxed, mutate_by_relaxation, relax_nodes,
)
from .tree import (
    ExprTree, decode, format_expr, linearize, mask, parse_expr, simplify,
    subtree_span, swap_subtrees,
)
from .vocab import Token

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
