"""Constrained two-objective NSGA-II over one operator's parameter space.

Objectives, both minimised, over a set of documents:

* ``f1`` - aggregated Levenshtein distance between ground truth and OCR output
* ``f2`` - negated aggregated count of words whose occurrence counts match

Constraints are the parity requirements of :mod:`ocrtune.params`; they are
handled with feasibility-first (constraint) dominance.  All random draws come
from generators keyed by ``(seed, generation, slot)`` so a run is reproducible
regardless of how fitness evaluations are scheduled.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import params as P
from .imaging import InvalidParameter, apply_operator
from .metrics import bow_count_matches, edit_distance, normalize
from .ocr import EngineFailure

log = logging.getLogger(__name__)


@dataclass
class TunerConfig:
    population_size: int = 24
    generations: int = 30
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None: 1 / number of genes
    seed: int = 0
    aggregation: str = "sum"
    workers: int = 1

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError(f"population_size must be an even integer >= 4, got {self.population_size}")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.aggregation not in ("sum", "mean"):
            raise ValueError(f"aggregation must be 'sum' or 'mean', got {self.aggregation!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Individual:
    assignment: P.ParamAssignment
    f1: float
    f2: float
    violation: float
    rank: int | None = None
    crowding: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.violation == 0

    @property
    def objectives(self) -> tuple[float, float]:
        return (self.f1, self.f2)


@dataclass
class TuneResult:
    front: list[Individual]
    history: list[dict]
    evaluations: int
    population: list[Individual] = field(default_factory=list)
    generations: list[list[Individual]] = field(default_factory=list)


def evaluate_fitness(assignment: P.ParamAssignment, samples, engine,
                     aggregation: str = "sum") -> tuple[float, float, float]:
    """Run operator, OCR and scoring on every sample; returns ``(f1, f2, violation)``.

    A document whose processing or recognition fails counts as fully wrong:
    distance equal to its ground-truth length and no matched words.
    """
    if not samples:
        raise ValueError("fitness needs at least one document")
    distances, matches = [], []
    params = assignment.as_dict()
    for s in samples:
        gt = normalize(s.text)
        try:
            out = normalize(engine.recognize(apply_operator(assignment.algorithm, s.raster, params)))
        except (EngineFailure, InvalidParameter) as exc:
            log.warning("document %s failed under %s: %s", s.id, assignment.to_text(), exc)
            distances.append(len(gt))
            matches.append(0)
            continue
        distances.append(edit_distance(gt, out))
        matches.append(bow_count_matches(gt, out))
    agg = sum if aggregation == "sum" else (lambda xs: sum(xs) / len(xs))
    violation = P.constraint_violation(assignment).total
    return float(agg(distances)), 0.0 - float(agg(matches)), violation


def constraint_dominates(a, b) -> bool:
    if a.violation == 0 and b.violation > 0:
        return True
    if a.violation > 0:
        return b.violation > 0 and a.violation < b.violation
    return (a.f1 <= b.f1 and a.f2 <= b.f2) and (a.f1 < b.f1 or a.f2 < b.f2)


def fast_nondominated_sort(pop) -> list[list[int]]:
    """Partition ``pop`` into fronts of indices under constraint dominance."""
    n = len(pop)
    dominated_by = [[] for _ in range(n)]
    count = [0] * n
    fronts = [[]]
    for i in range(n):
        for j in range(i + 1, n):
            if constraint_dominates(pop[i], pop[j]):
                dominated_by[i].append(j)
                count[j] += 1
            elif constraint_dominates(pop[j], pop[i]):
                dominated_by[j].append(i)
                count[i] += 1
    fronts[0] = [i for i in range(n) if count[i] == 0]
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(j)
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(objectives) -> list[float]:
    """Sum over objectives of the normalised gap between each member's neighbours."""
    n = len(objectives)
    if n <= 2:
        return [math.inf] * n
    dist = [0.0] * n
    for m in range(len(objectives[0])):
        order = sorted(range(n), key=lambda i: objectives[i][m])
        lo, hi = objectives[order[0]][m], objectives[order[-1]][m]
        dist[order[0]] = dist[order[-1]] = math.inf
        if hi == lo:
            continue
        for k in range(1, n - 1):
            i = order[k]
            if dist[i] != math.inf:
                dist[i] += (objectives[order[k + 1]][m] - objectives[order[k - 1]][m]) / (hi - lo)
    return dist


def assign_rank_and_crowding(pop) -> list[list[int]]:
    fronts = fast_nondominated_sort(pop)
    for rank, front in enumerate(fronts):
        dist = crowding_distance([pop[i].objectives for i in front])
        for i, d in zip(front, dist):
            pop[i].rank = rank
            pop[i].crowding = d
    return fronts


def tournament_select(pop, rng: np.random.Generator) -> Individual:
    """Binary tournament: lower rank wins, then larger crowding, then a fair coin."""
    a = pop[int(rng.integers(len(pop)))]
    b = pop[int(rng.integers(len(pop)))]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def crossover(a: P.ParamAssignment, b: P.ParamAssignment, rng: np.random.Generator,
              rate: float) -> tuple[P.ParamAssignment, P.ParamAssignment]:
    """Uniform crossover: with probability ``rate`` each gene is swapped with odds 1/2."""
    if a.algorithm != b.algorithm:
        raise ValueError("parents must share an algorithm")
    va, vb = list(a.values), list(b.values)
    if rng.random() < rate:
        for k in range(len(va)):
            if rng.random() < 0.5:
                va[k], vb[k] = vb[k], va[k]
    return P.ParamAssignment(a.algorithm, tuple(va)), P.ParamAssignment(b.algorithm, tuple(vb))


def mutate(x: P.ParamAssignment, rng: np.random.Generator, rate: float) -> P.ParamAssignment:
    """Reset each gene with probability ``rate`` to a fresh admissible draw."""
    specs = P.schema(x.algorithm)
    values = []
    for spec, (name, v) in zip(specs, x.values):
        if rng.random() < rate:
            v = P.draw_gene(spec, rng)
        values.append((name, v))
    return P.ParamAssignment(x.algorithm, tuple(values))


class _Evaluator:
    """Memoised, optionally parallel fitness evaluation."""

    def __init__(self, samples, engine, config):
        self.samples = samples
        self.engine = engine
        self.config = config
        self.cache = {}

    def __call__(self, assignments) -> list[Individual]:
        todo = list(dict.fromkeys(a for a in assignments if a not in self.cache))
        run = lambda a: evaluate_fitness(a, self.samples, self.engine, self.config.aggregation)  # noqa: E731
        if self.config.workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.config.workers) as pool:
                results = list(pool.map(run, todo))
        else:
            results = [run(a) for a in todo]
        self.cache.update(zip(todo, results))
        return [Individual(a, *self.cache[a]) for a in assignments]


def _history_row(generation, pop):
    feasible = [x for x in pop if x.feasible]
    return {
        "generation": generation,
        "best_f1": min((x.f1 for x in feasible), default=math.nan),
        "best_neg_f2": max((-x.f2 for x in feasible), default=math.nan),
        "feasible_fraction": len(feasible) / len(pop),
    }


def _first_front(pop):
    seen, front = set(), []
    for x in pop:
        if x.rank == 0 and x.assignment not in seen:
            seen.add(x.assignment)
            front.append(x)
    return front


def evolve(algorithm: str, samples, engine, config: TunerConfig = TunerConfig(),
           keep_generations: bool = False) -> TuneResult:
    specs = P.schema(algorithm)
    mutation_rate = config.mutation_rate if config.mutation_rate is not None else 1.0 / len(specs)
    n = config.population_size
    evaluate = _Evaluator(samples, engine, config)

    pop = evaluate([P.random_assignment(algorithm, np.random.default_rng([config.seed, 0, i]))
                    for i in range(n)])
    assign_rank_and_crowding(pop)
    history = [_history_row(0, pop)]
    snapshots = [list(pop)] if keep_generations else []

    for gen in range(1, config.generations + 1):
        children = []
        for j in range(n // 2):
            rng = np.random.default_rng([config.seed, gen, j])
            p1, p2 = tournament_select(pop, rng), tournament_select(pop, rng)
            c1, c2 = crossover(p1.assignment, p2.assignment, rng, config.crossover_rate)
            children += [mutate(c1, rng, mutation_rate), mutate(c2, rng, mutation_rate)]
        merged = pop + evaluate(children)
        fronts = assign_rank_and_crowding(merged)
        survivors = []
        for front in fronts:
            if len(survivors) + len(front) <= n:
                survivors += [merged[i] for i in front]
                continue
            by_crowding = sorted(front, key=lambda i: (-merged[i].crowding, i))
            survivors += [merged[i] for i in by_crowding[:n - len(survivors)]]
            break
        pop = survivors
        history.append(_history_row(gen, pop))
        if keep_generations:
            snapshots.append(list(pop))
        log.debug("generation %d: %s", gen, history[-1])

    return TuneResult(_first_front(pop), history, len(evaluate.cache), pop, snapshots)


def select_solution(front) -> P.ParamAssignment:
    """Lowest f1, then lowest f2, then the lexicographically smallest assignment."""
    if not front:
        raise ValueError("cannot select from an empty front")
    best = min(front, key=lambda x: (x.violation, x.f1, x.f2, tuple(v for _, v in x.assignment.values)))
    return best.assignment


def write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["generation", "best_f1", "best_neg_f2", "feasible_fraction"],
                           lineterminator="\n")
        w.writeheader()
        for row in history:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})


def write_front(path, front) -> None:
    with open(path, "w", newline="") as fh:
        for x in sorted(front, key=lambda x: (x.f1, x.f2, x.assignment.values)):
            fh.write(f"{x.assignment.to_text()}\t# f1={x.f1:g} f2={x.f2:g} violation={x.violation:g}\n")


def read_assignment(path) -> P.ParamAssignment:
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            return P.ParamAssignment.from_text(line)
    raise P.InvalidAssignment(f"{path}: no parameter line found")
