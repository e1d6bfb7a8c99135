"""Edit guidance: masked-token mutation guides, crossover-point guides, and
the fitness-improvement training-pair pipelines that feed the learned guide.

Three guide implementations share one contract. `UniformGuide` spreads mass
evenly (the unguided baseline), `OracleGuide` scores candidates by actually
evaluating them on the dataset, and `LearnedGuide` is a smoothed count model
over token contexts plus a position scorer, trained on collected pairs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .bfgs import OptConfig, optimize_constants
from .datasets import (
    Dataset, SamplingSpec, UNIFORM, dataset_from_csv, dataset_to_csv,
    sample_expression, summarize,
)
from .errors import DomainExhausted, InsufficientData
from .evaluate import SENTINEL, fitness
from .generate import random_tree, select_mutation_nodes
from .tree import ExprTree, TokenSeq, decode, linearize, mask, subtree_span, swap_subtrees
from .vocab import CONSTANT, CONST_SYMBOL, SEP_TOKEN, TOK, Token, fillable_tokens

GREEDY = "greedy"
SAMPLE = "sample"

PROB_TOL = 1e-9


# --- queries and responses ---------------------------------------------------

@dataclass(frozen=True)
class MutationQuery:
    masked: TokenSeq
    summary: np.ndarray

    @property
    def mask_positions(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.masked) if t.kind == "mask")

    @property
    def dims(self) -> int:
        return (len(self.summary) - 1) // 4 - 1

    def __post_init__(self):
        if not self.mask_positions:
            raise ValueError("mutation query needs at least one mask")
        if any(t.kind == "sep" for t in self.masked):
            raise ValueError("mutation query must not contain a separator")


@dataclass(frozen=True)
class MutationResponse:
    positions: tuple[int, ...]
    candidates: tuple[tuple[Token, ...], ...]
    probs: tuple[np.ndarray, ...]

    def validate(self) -> None:
        for cands, p in zip(self.candidates, self.probs):
            if abs(float(np.sum(p)) - 1.0) > PROB_TOL:
                raise ValueError("probabilities must sum to 1")
            if any(t.is_special for t in cands):
                raise ValueError("special tokens cannot receive mass")


@dataclass(frozen=True)
class CrossoverQuery:
    joint: TokenSeq
    summary: np.ndarray

    @property
    def sep_index(self) -> int:
        return next(i for i, t in enumerate(self.joint) if t.kind == "sep")

    @property
    def left(self) -> TokenSeq:
        return self.joint[: self.sep_index]

    @property
    def right(self) -> TokenSeq:
        return self.joint[self.sep_index + 1:]

    def __post_init__(self):
        if sum(1 for t in self.joint if t.kind == "sep") != 1:
            raise ValueError("joint sequence needs exactly one separator")


@dataclass(frozen=True)
class CrossoverResponse:
    pa: np.ndarray
    pb: np.ndarray

    def validate(self) -> None:
        for p in (self.pa, self.pb):
            if abs(float(np.sum(p)) - 1.0) > PROB_TOL:
                raise ValueError("probabilities must sum to 1")


def make_mutation_query(ds: Dataset, masked: TokenSeq) -> MutationQuery:
    return MutationQuery(masked, summarize(ds))


def make_crossover_query(ds: Dataset, a: ExprTree, b: ExprTree) -> CrossoverQuery:
    joint = linearize(a) + (SEP_TOKEN,) + linearize(b)
    return CrossoverQuery(joint, summarize(ds))


# --- arity legality ----------------------------------------------------------

def legal_arities(masked: TokenSeq, position: int) -> tuple[int, ...]:
    """Arities a mask may take if the filled sequence is to decode without
    repair; other masks count as wildcards of arity 0..2. Falls back to all
    arities when no exact fill exists."""
    s_fixed = 0
    n_other = 0
    for j, tok in enumerate(masked):
        if j == position:
            continue
        if tok.kind == "mask":
            n_other += 1
        else:
            s_fixed += tok.arity - 1
    lo = -s_fixed - n_other
    hi = -s_fixed + n_other
    legal = tuple(a for a in (0, 1, 2) if lo <= a <= hi)
    return legal or (0, 1, 2)


def candidate_tokens(masked: TokenSeq, position: int, dims: int) -> tuple[Token, ...]:
    arities = set(legal_arities(masked, position))
    return tuple(t for t in fillable_tokens(dims) if t.arity in arities)


# --- guide contract ----------------------------------------------------------

class Guide:
    name = "base"

    def guide_mutation(self, q: MutationQuery) -> MutationResponse:
        raise NotImplementedError

    def guide_crossover(self, q: CrossoverQuery) -> CrossoverResponse:
        raise NotImplementedError


def guide_mutation(guide: Guide, q: MutationQuery) -> MutationResponse:
    r = guide.guide_mutation(q)
    r.validate()
    return r


def guide_crossover(guide: Guide, q: CrossoverQuery) -> CrossoverResponse:
    r = guide.guide_crossover(q)
    r.validate()
    return r


class UniformGuide(Guide):
    name = "uniform"

    def guide_mutation(self, q: MutationQuery) -> MutationResponse:
        positions = q.mask_positions
        cands = tuple(candidate_tokens(q.masked, p, q.dims) for p in positions)
        probs = tuple(np.full(len(c), 1.0 / len(c)) for c in cands)
        return MutationResponse(positions, cands, probs)

    def guide_crossover(self, q: CrossoverQuery) -> CrossoverResponse:
        la, lb = len(q.left), len(q.right)
        return CrossoverResponse(np.full(la, 1.0 / la), np.full(lb, 1.0 / lb))


def _score_softmax(scores: np.ndarray) -> np.ndarray:
    finite = np.isfinite(scores)
    if not finite.any():
        return np.full(scores.size, 1.0 / scores.size)
    m = np.max(scores[finite])
    e = np.where(finite, np.exp(np.clip(scores - m, -700, 0)), 0.0)
    return e / np.sum(e)


RANK_DECAY = 0.7


def _rank_probs(scores: np.ndarray, decay: float = RANK_DECAY) -> np.ndarray:
    """Geometric mass by score rank (best first, stable on ties), so the
    argmax is the best-scoring candidate while sampling still explores.
    Non-finite scores get zero mass."""
    finite = np.isfinite(scores)
    if not finite.any():
        return np.full(scores.size, 1.0 / scores.size)
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    p = np.zeros(scores.size)
    w = 1.0
    for i in order:
        if np.isfinite(scores[i]):
            p[i] = w
            w *= decay
    return p / np.sum(p)


class OracleGuide(Guide):
    """Scores candidate edits by evaluating them on the dataset.

    Single-mask queries evaluate every legal fill; multi-mask queries are
    filled greedily left to right (remaining masks stand in as x1 during
    scoring). Crossover queries enumerate all root pairs.
    """

    name = "oracle"

    def __init__(self, ds: Dataset, max_nodes: int | None = None,
                 decay: float = RANK_DECAY):
        self.ds = ds
        self.max_nodes = max_nodes
        self.decay = decay

    def _fill_score(self, seq: list[Token]) -> float:
        scored = [t if t.kind != "mask" else TOK["x1"] for t in seq]
        return fitness(decode(scored), self.ds).r2

    def guide_mutation(self, q: MutationQuery) -> MutationResponse:
        positions = q.mask_positions
        current = list(q.masked)
        cands_out, probs_out = [], []
        for p in positions:
            cands = candidate_tokens(tuple(current), p, q.dims)
            scores = np.empty(len(cands))
            for k, tok in enumerate(cands):
                trial = list(current)
                trial[p] = tok
                scores[k] = self._fill_score(trial)
            probs = _rank_probs(scores, self.decay)
            best = int(np.argmax(probs))
            current[p] = cands[best]
            cands_out.append(cands)
            probs_out.append(probs)
        return MutationResponse(positions, tuple(cands_out), tuple(probs_out))

    def guide_crossover(self, q: CrossoverQuery) -> CrossoverResponse:
        a = decode(q.left)
        b = decode(q.right)
        la, lb = a.node_count, b.node_count
        score = np.full((la, lb), SENTINEL)
        for i in range(la):
            for j in range(lb):
                res = swap_subtrees(a, i, b, j, self.max_nodes)
                f1 = fitness(res.first, self.ds).r2
                f2 = fitness(res.second, self.ds).r2
                score[i, j] = max(f1, f2)
        return CrossoverResponse(_rank_probs(np.max(score, axis=1), self.decay),
                                 _rank_probs(np.max(score, axis=0), self.decay))


# --- mask filling ------------------------------------------------------------

def fill_masks(q: MutationQuery, r: MutationResponse, policy: str = GREEDY,
               seed: int | None = None) -> TokenSeq:
    """Substitute every mask per the response, then pass the result through
    decode-repair. Greedy takes the argmax (ties to the lowest vocabulary
    index); Sample draws per-mask from the distribution."""
    if policy not in (GREEDY, SAMPLE):
        raise ValueError(f"unknown fill policy {policy!r}")
    rng = np.random.default_rng(seed) if policy == SAMPLE else None
    seq = list(q.masked)
    for pos, cands, probs in zip(r.positions, r.candidates, r.probs):
        if policy == GREEDY:
            idx = int(np.argmax(probs))
        else:
            idx = int(rng.choice(len(cands), p=np.asarray(probs) / np.sum(probs)))
        seq[pos] = cands[idx]
    return linearize(decode(seq))


# --- training pairs ----------------------------------------------------------

@dataclass(frozen=True)
class MutationPair:
    input_seq: TokenSeq
    mask_positions: tuple[int, ...]
    target_tokens: dict[int, Token]
    dataset: Dataset
    r2_input: float
    r2_target: float


@dataclass(frozen=True)
class CrossoverPair:
    first_seq: TokenSeq
    second_seq: TokenSeq
    ya_index: int
    yb_index: int
    dataset: Dataset
    parent_best: float
    offspring_best: float

    @property
    def joint(self) -> TokenSeq:
        return self.first_seq + (SEP_TOKEN,) + self.second_seq


@dataclass(frozen=True)
class PairGenConfig:
    dims: int = 1
    rows: int = 20
    low: float = -1.0
    high: float = 1.0
    max_nodes: int = 12
    select_rate: float = 0.1
    select_cap: int = 4
    population: int = 16
    mask_rate: float = 0.15
    fill_policy: str = GREEDY
    seed: int = 0


def _synthetic_dataset(rng, gen: PairGenConfig) -> Dataset | None:
    for _ in range(8):
        target = random_tree(rng, gen.max_nodes, gen.dims)
        spec = SamplingSpec(UNIFORM, gen.low, gen.high, gen.rows, gen.dims,
                            int(rng.integers(2 ** 31)))
        try:
            ds = sample_expression(target, spec)
        except DomainExhausted:
            continue
        if np.std(ds.y) > 0:
            return ds
    return None


def collect_mutation_pairs(n: int, gen: PairGenConfig = PairGenConfig(),
                           cfg: OptConfig = OptConfig(max_iters=40, restarts=1)) -> list[MutationPair]:
    """Harvest improvement-ordered masked-edit pairs.

    Each round: sample a random target and dataset, mutate a random start
    expression through the relaxation pipeline, orient the (input, target)
    roles so the target side fits strictly better, mask the changed
    positions, and keep the pair. Exact R² ties, shape-changing edits and
    duplicate preorder sequences are discarded. The stored r2 values are
    recomputed from the stored sequences so that re-evaluation reproduces
    them exactly.
    """
    from .relax import mutate_by_relaxation

    rng = np.random.default_rng(gen.seed)
    out: list[MutationPair] = []
    seen: set = set()
    attempts = 0
    limit = 400 * n
    while len(out) < n and attempts < limit:
        attempts += 1
        ds = _synthetic_dataset(rng, gen)
        if ds is None:
            continue
        start = random_tree(rng, gen.max_nodes, gen.dims)
        nodes = select_mutation_nodes(start, rng, gen.select_rate, gen.select_cap)
        if not nodes:
            continue
        res = mutate_by_relaxation(start, ds, nodes, replace(cfg, seed=int(rng.integers(2 ** 31))))
        if res.fell_back:
            continue
        r2_b = fitness(start, ds).r2
        r2_c = res.fitness.r2
        if math.isnan(r2_b) or math.isnan(r2_c) or r2_b == r2_c:
            continue
        if r2_c > r2_b:
            s_in, s_out, r2_in = linearize(start), linearize(res.tree), r2_b
        else:
            s_in, s_out, r2_in = linearize(res.tree), linearize(start), r2_c
        if len(s_in) != len(s_out):
            continue
        diffs = tuple(i for i in range(len(s_in))
                      if not s_in[i].same_symbol(s_out[i]))
        if not diffs:
            continue
        reconstructed = list(s_in)
        for i in diffs:
            reconstructed[i] = s_out[i]
        target_fit = fitness(decode(reconstructed), ds).r2
        if not target_fit > r2_in:
            continue
        key = (tuple(t.symbol for t in mask(s_in, diffs)),
               tuple((i, s_out[i].symbol) for i in diffs))
        if key in seen:
            continue
        seen.add(key)
        out.append(MutationPair(s_in, diffs, {i: s_out[i] for i in diffs},
                                ds, r2_in, target_fit))
    return out


def collect_crossover_pairs(n: int, gen: PairGenConfig = PairGenConfig(),
                            cfg: OptConfig = OptConfig(max_iters=20, restarts=1),
                            mutation_guide_factory=None) -> list[CrossoverPair]:
    """Harvest crossover-position pairs from guided-mutation populations.

    Each round: build a small population, apply one guided-mutation pass,
    cross a random parent pair at random roots, refit constants on parents
    and offspring, and store the pair oriented so that re-swapping at the
    labelled roots strictly improves max fitness. Exact ties are discarded.
    """
    if mutation_guide_factory is None:
        mutation_guide_factory = lambda ds: UniformGuide()  # noqa: E731
    rng = np.random.default_rng(gen.seed + 1)
    out: list[CrossoverPair] = []
    attempts = 0
    limit = 400 * n
    while len(out) < n and attempts < limit:
        attempts += 1
        ds = _synthetic_dataset(rng, gen)
        if ds is None:
            continue
        guide = mutation_guide_factory(ds)
        pop = [random_tree(rng, gen.max_nodes, gen.dims) for _ in range(gen.population)]
        mutated = []
        for t in pop:
            seq = linearize(t)
            positions = _draw_mask_positions(seq, gen.mask_rate, rng)
            q = make_mutation_query(ds, mask(seq, positions))
            r = guide.guide_mutation(q)
            filled = fill_masks(q, r, gen.fill_policy, int(rng.integers(2 ** 31)))
            mutated.append(decode(filled))
        i1, i2 = rng.choice(len(mutated), size=2, replace=False)
        e1, e2 = mutated[int(i1)], mutated[int(i2)]
        u1 = int(rng.integers(e1.node_count))
        u2 = int(rng.integers(e2.node_count))
        swap = swap_subtrees(e1, u1, e2, u2, gen.max_nodes * 2)
        if swap.first_rejected or swap.second_rejected:
            continue
        seed = int(rng.integers(2 ** 31))
        opt = replace(cfg, seed=seed)
        p1, f1 = optimize_constants(e1, ds, opt)
        p2, f2 = optimize_constants(e2, ds, opt)
        o1, f3 = optimize_constants(swap.first, ds, opt)
        o2, f4 = optimize_constants(swap.second, ds, opt)
        parents_best = max(f1.r2, f2.r2)
        offspring_best = max(f3.r2, f4.r2)
        if math.isnan(parents_best) or math.isnan(offspring_best):
            continue
        if offspring_best > parents_best:
            stored = (p1, p2)
        elif offspring_best < parents_best:
            stored = (o1, o2)
        else:
            continue
        pair = _finalize_crossover_pair(stored, u1, u2, ds, opt)
        if pair is not None:
            out.append(pair)
    return out


def _finalize_crossover_pair(stored, u1, u2, ds, opt) -> CrossoverPair | None:
    """Recompute both sides from the stored trees so the record is exactly
    reproducible, and keep it only if the ordering is strict."""
    a, b = stored
    if u1 >= a.node_count or u2 >= b.node_count:
        return None
    fa = fitness(a, ds).r2
    fb = fitness(b, ds).r2
    swap = swap_subtrees(a, u1, b, u2)
    oa, foa = optimize_constants(swap.first, ds, opt)
    ob, fob = optimize_constants(swap.second, ds, opt)
    parent_best = max(fa, fb)
    offspring_best = max(foa.r2, fob.r2)
    if not offspring_best > parent_best:
        return None
    return CrossoverPair(linearize(a), linearize(b), u1, u2, ds,
                         parent_best, offspring_best)


def _draw_mask_positions(seq: TokenSeq, rate: float, rng) -> list[int]:
    positions = [i for i in range(len(seq)) if rng.random() < rate]
    if not positions:
        positions = [int(rng.integers(len(seq)))]
    return positions


def reevaluate_mutation_pair(pair: MutationPair) -> tuple[float, float]:
    r2_in = fitness(decode(pair.input_seq), pair.dataset).r2
    reconstructed = list(pair.input_seq)
    for i, tok in pair.target_tokens.items():
        reconstructed[i] = tok
    r2_t = fitness(decode(reconstructed), pair.dataset).r2
    return r2_in, r2_t


def reevaluate_crossover_pair(pair: CrossoverPair,
                              cfg: OptConfig) -> tuple[float, float]:
    a = decode(pair.first_seq)
    b = decode(pair.second_seq)
    parent_best = max(fitness(a, pair.dataset).r2, fitness(b, pair.dataset).r2)
    swap = swap_subtrees(a, pair.ya_index, b, pair.yb_index)
    _, f1 = optimize_constants(swap.first, pair.dataset, cfg)
    _, f2 = optimize_constants(swap.second, pair.dataset, cfg)
    return parent_best, max(f1.r2, f2.r2)


# --- corpus persistence ------------------------------------------------------

def token_to_str(tok: Token) -> str:
    if tok.kind == CONSTANT and tok.value is not None:
        return f"C={tok.value!r}"
    return tok.symbol


def token_from_str(s: str) -> Token:
    if s.startswith("C="):
        return Token(CONSTANT, CONST_SYMBOL, float(s[2:]))
    return TOK[s]


class _DatasetStore:
    """Writes each distinct dataset once and hands out its CSV reference."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        self.refs: dict[int, str] = {}
        os.makedirs(data_dir, exist_ok=True)

    def ref(self, ds: Dataset) -> str:
        key = id(ds)
        if key not in self.refs:
            name = f"ds_{len(self.refs):05d}.csv"
            dataset_to_csv(ds, os.path.join(self.data_dir, name))
            self.refs[key] = name
        return self.refs[key]


def save_mutation_pairs(pairs: list[MutationPair], path: str, data_dir: str) -> None:
    store = _DatasetStore(data_dir)
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            rec = {
                "input_seq": [token_to_str(t) for t in p.input_seq],
                "mask_positions": list(p.mask_positions),
                "target_tokens": {str(i): token_to_str(t)
                                  for i, t in sorted(p.target_tokens.items())},
                "dataset_csv_ref": store.ref(p.dataset),
                "r2_input": p.r2_input,
                "r2_target": p.r2_target,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_mutation_pairs(path: str, data_dir: str) -> list[MutationPair]:
    cache: dict[str, Dataset] = {}
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            ref = rec["dataset_csv_ref"]
            if ref not in cache:
                cache[ref] = dataset_from_csv(os.path.join(data_dir, ref))
            out.append(MutationPair(
                tuple(token_from_str(s) for s in rec["input_seq"]),
                tuple(rec["mask_positions"]),
                {int(i): token_from_str(s) for i, s in rec["target_tokens"].items()},
                cache[ref],
                float(rec["r2_input"]),
                float(rec["r2_target"]),
            ))
    return out


def save_crossover_pairs(pairs: list[CrossoverPair], path: str, data_dir: str) -> None:
    store = _DatasetStore(data_dir)
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            rec = {
                "joint_seq": [token_to_str(t) for t in p.joint],
                "ya_index": p.ya_index,
                "yb_index": p.yb_index,
                "dataset_csv_ref": store.ref(p.dataset),
                "parent_best": p.parent_best,
                "offspring_best": p.offspring_best,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_crossover_pairs(path: str, data_dir: str) -> list[CrossoverPair]:
    cache: dict[str, Dataset] = {}
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            toks = [token_from_str(s) for s in rec["joint_seq"]]
            sep = next(i for i, t in enumerate(toks) if t.kind == "sep")
            ref = rec["dataset_csv_ref"]
            if ref not in cache:
                cache[ref] = dataset_from_csv(os.path.join(data_dir, ref))
            out.append(CrossoverPair(
                tuple(toks[:sep]), tuple(toks[sep + 1:]),
                int(rec["ya_index"]), int(rec["yb_index"]),
                cache[ref], float(rec["parent_best"]), float(rec["offspring_best"]),
            ))
    return out


# --- learned editor ----------------------------------------------------------

LEFT_PAD = "^"
RIGHT_PAD = "$"
EDITOR_FORMAT = "gesr-editor"
EDITOR_VERSION = 1


def _bucket(summary: np.ndarray, std_cuts: tuple[float, float]) -> str:
    dims = (len(summary) - 1) // 4 - 1
    y_mean = summary[4 * dims + 2]
    y_std = summary[4 * dims + 3]
    sign = "+" if y_mean > 0 else ("-" if y_mean < 0 else "0")
    if y_std <= std_cuts[0]:
        ter = 0
    elif y_std <= std_cuts[1]:
        ter = 1
    else:
        ter = 2
    return f"{sign}{ter}"


def _context_key(symbols: list[str], pos: int, w: int, bucket: str) -> str:
    left = symbols[max(0, pos - w):pos]
    left = [LEFT_PAD] * (w - len(left)) + left
    right = symbols[pos + 1:pos + 1 + w]
    right = right + [RIGHT_PAD] * (w - len(right))
    return f"{w}|{bucket}|{','.join(left)}|{','.join(right)}"


def _position_features(seq: TokenSeq) -> np.ndarray:
    n = len(seq)
    stack: list[int] = []  # open operators' remaining child slots
    feats = np.zeros((n, 8))
    for i, tok in enumerate(seq):
        lo, hi = subtree_span(seq, i)
        feats[i] = [
            1.0,
            1.0 if tok.kind == "binary" else 0.0,
            1.0 if tok.kind == "unary" else 0.0,
            1.0 if tok.kind == "variable" else 0.0,
            1.0 if tok.kind == "constant" else 0.0,
            (hi - lo) / n,
            len(stack) / 8.0,
            i / n,
        ]
        if stack:
            stack[-1] -= 1
        if tok.arity > 0:
            stack.append(tok.arity)
        else:
            while stack and stack[-1] == 0:
                stack.pop()
    return feats


class LearnedGuide(Guide):
    name = "learned"

    def __init__(self, window: int = 3, alpha: float = 0.1,
                 counts: dict | None = None, marginal: dict | None = None,
                 std_cuts: tuple[float, float] = (0.5, 2.0),
                 xweights: np.ndarray | None = None):
        self.window = window
        self.alpha = alpha
        self.counts = counts if counts is not None else {}
        self.marginal = marginal if marginal is not None else {}
        self.std_cuts = std_cuts
        self.xweights = xweights if xweights is not None else np.zeros(8)

    # -- mutation model

    def _observe(self, symbols: list[str], pos: int, target: str, bucket: str) -> None:
        for w in range(self.window, -1, -1):
            key = _context_key(symbols, pos, w, bucket)
            table = self.counts.setdefault(key, {})
            table[target] = table.get(target, 0) + 1
        self.marginal[target] = self.marginal.get(target, 0) + 1

    def _distribution(self, symbols: list[str], pos: int, bucket: str,
                      cands: tuple[Token, ...]) -> np.ndarray:
        table = None
        for w in range(self.window, -1, -1):
            t = self.counts.get(_context_key(symbols, pos, w, bucket))
            if t and sum(t.get(c.symbol, 0) for c in cands) > 0:
                table = t
                break
        if table is None:
            table = self.marginal
        raw = np.array([table.get(c.symbol, 0) + self.alpha for c in cands])
        return raw / np.sum(raw)

    def guide_mutation(self, q: MutationQuery) -> MutationResponse:
        symbols = [t.symbol for t in q.masked]
        bucket = _bucket(q.summary, self.std_cuts)
        positions = q.mask_positions
        cands = tuple(candidate_tokens(q.masked, p, q.dims) for p in positions)
        probs = tuple(self._distribution(symbols, p, bucket, c)
                      for p, c in zip(positions, cands))
        return MutationResponse(positions, cands, probs)

    def guide_crossover(self, q: CrossoverQuery) -> CrossoverResponse:
        fa = _position_features(q.left)
        fb = _position_features(q.right)
        return CrossoverResponse(_score_softmax(fa @ self.xweights),
                                 _score_softmax(fb @ self.xweights))

    # -- serialization

    def to_json(self) -> str:
        return json.dumps({
            "format": EDITOR_FORMAT,
            "version": EDITOR_VERSION,
            "window": self.window,
            "alpha": self.alpha,
            "std_cuts": list(self.std_cuts),
            "counts": self.counts,
            "marginal": self.marginal,
            "xweights": [float(v) for v in self.xweights],
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "LearnedGuide":
        obj = json.loads(text)
        if obj.get("format") != EDITOR_FORMAT:
            raise ValueError("not an editor snapshot")
        if obj.get("version") != EDITOR_VERSION:
            raise ValueError(f"unsupported editor version {obj.get('version')}")
        return LearnedGuide(
            window=int(obj["window"]),
            alpha=float(obj["alpha"]),
            counts=obj["counts"],
            marginal=obj["marginal"],
            std_cuts=tuple(obj["std_cuts"]),
            xweights=np.asarray(obj["xweights"], dtype=float),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @staticmethod
    def load(path: str) -> "LearnedGuide":
        with open(path, "r", encoding="utf-8") as fh:
            return LearnedGuide.from_json(fh.read())


@dataclass(frozen=True)
class EditorTrainConfig:
    window: int = 3
    alpha: float = 0.1
    gd_iters: int = 200
    gd_lr: float = 0.5
    min_pairs: int = 100


def train_learned_editor(pairs: list[MutationPair],
                         xpairs: list[CrossoverPair] | None = None,
                         cfg: EditorTrainConfig = EditorTrainConfig()) -> LearnedGuide:
    """Fit the count-model mutation editor and the crossover position scorer."""
    if len(pairs) < cfg.min_pairs:
        raise InsufficientData(f"need at least {cfg.min_pairs} mutation pairs, "
                               f"got {len(pairs)}")
    stds = sorted(float(np.std(p.dataset.y)) for p in pairs)
    cut1 = stds[len(stds) // 3]
    cut2 = stds[(2 * len(stds)) // 3]
    guide = LearnedGuide(window=cfg.window, alpha=cfg.alpha, std_cuts=(cut1, cut2))
    for p in pairs:
        masked = mask(p.input_seq, p.mask_positions)
        symbols = [t.symbol for t in masked]
        bucket = _bucket(summarize(p.dataset), guide.std_cuts)
        for pos in p.mask_positions:
            guide._observe(symbols, pos, p.target_tokens[pos].symbol, bucket)

    if xpairs:
        w = np.zeros(8)
        sides = []
        for p in xpairs:
            sides.append((_position_features(p.first_seq), p.ya_index))
            sides.append((_position_features(p.second_seq), p.yb_index))
        for _ in range(cfg.gd_iters):
            grad = np.zeros(8)
            for feats, label in sides:
                sm = _score_softmax(feats @ w)
                grad += feats.T @ sm - feats[label]
            w -= cfg.gd_lr * grad / len(sides)
        guide.xweights = w
    return guide


def editor_top1_accuracy(guide: LearnedGuide, pairs: list[MutationPair]) -> float:
    """Held-out masked-token argmax accuracy."""
    hits = 0
    total = 0
    for p in pairs:
        masked = mask(p.input_seq, p.mask_positions)
        q = MutationQuery(masked, summarize(p.dataset))
        r = guide.guide_mutation(q)
        for pos, cands, probs in zip(r.positions, r.candidates, r.probs):
            total += 1
            if cands[int(np.argmax(probs))].symbol == p.target_tokens[pos].symbol:
                hits += 1
    return hits / max(total, 1)
