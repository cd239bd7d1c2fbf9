"""Evolutionary search with a learned performance predictor as fitness."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from . import archspace, dataset
from .archspace import CellSpec, SpaceParams
from .dataset import OracleParams


@dataclass(frozen=True)
class EAConfig:
    population_size: int = 100
    generations: int = 50
    tournament_size: int = 5
    mutation_rate: float = 0.1
    crossover_rate: float = 0.5
    elitism: int = 2
    top_k: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.population_size >= self.top_k >= 1:
            raise ValueError("need population_size >= top_k >= 1")
        if not (0 <= self.mutation_rate <= 1 and 0 <= self.crossover_rate <= 1):
            raise ValueError("rates must lie in [0, 1]")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must lie in [0, population_size)")
        if self.tournament_size < 1 or self.generations < 0:
            raise ValueError("tournament_size >= 1 and generations >= 0 required")


@dataclass
class SearchResult:
    top_k: list  # CellSpec, best predicted first
    predicted: list
    trajectory: list  # (generation, best predicted, mean predicted)
    true_accuracy: list | None = None
    best_true_accuracy: float | None = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        rows = []
        for k, spec in enumerate(self.top_k):
            row = spec.to_dict()
            row["predicted"] = float(self.predicted[k])
            row["true_accuracy"] = None if self.true_accuracy is None else float(self.true_accuracy[k])
            rows.append(row)
        return {
            "config": self.config,
            "top_k": rows,
            "best_true_accuracy": self.best_true_accuracy,
            "trajectory": [{"generation": g, "best": b, "mean": m} for g, b, m in self.trajectory],
        }

    def write_trajectory(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "best_predicted", "mean_predicted"])
            for g, b, m in self.trajectory:
                w.writerow([g, repr(b), repr(m)])


def oracle_fitness(oracle: OracleParams = OracleParams(), space: SpaceParams = SpaceParams()):
    """Fitness function that queries the synthetic oracle directly (sanity mode)."""
    return lambda specs: dataset.label_all(specs, oracle, space)


class _CachedFitness:
    """Memoizes a deterministic predictor by cell identity."""

    def __init__(self, predictor):
        self.predictor = predictor
        self.cache = {}

    def __call__(self, specs):
        missing = []
        for s in specs:
            if s not in self.cache and s not in missing:
                missing.append(s)
        if missing:
            for s, v in zip(missing, np.asarray(self.predictor(missing), dtype=np.float64)):
                self.cache[s] = float(v)
        return np.array([self.cache[s] for s in specs])


def _tournament(rng, fitness, size):
    contenders = rng.choice(len(fitness), size=min(size, len(fitness)), replace=False)
    return int(contenders[np.argmax(fitness[contenders])])


def evolve(predictor, space: SpaceParams = SpaceParams(), cfg: EAConfig = EAConfig()) -> SearchResult:
    """Tournament selection, crossover then mutation, with elitism.

    ``predictor`` maps a list of cells to predicted accuracies; a
    :class:`~archsage.trainer.TrainedAssessor` works directly.
    """
    rng = np.random.default_rng(cfg.seed)
    fitness_of = _CachedFitness(predictor)
    pop = [archspace.sample_random(rng, space) for _ in range(cfg.population_size)]
    fit = fitness_of(pop)
    trajectory = [(0, float(fit.max()), float(fit.mean()))]
    for gen in range(1, cfg.generations + 1):
        order = np.argsort(-fit, kind="stable")
        elites = [pop[i] for i in order[:cfg.elitism]]
        children = []
        while len(children) < cfg.population_size - cfg.elitism:
            parent = pop[_tournament(rng, fit, cfg.tournament_size)]
            if rng.random() < cfg.crossover_rate:
                other = pop[_tournament(rng, fit, cfg.tournament_size)]
                parent = archspace.crossover(parent, other, rng, space)
            children.append(archspace.mutate(parent, rng, cfg.mutation_rate, space))
        pop = elites + children
        fit = np.concatenate([fit[order[:cfg.elitism]], fitness_of(children)])
        trajectory.append((gen, float(fit.max()), float(fit.mean())))
    # every cell ever evaluated is a candidate; the cache keys are distinct cells
    ranked = sorted(fitness_of.cache.items(), key=lambda kv: -kv[1])[:cfg.top_k]
    return SearchResult([s for s, _ in ranked], [v for _, v in ranked], trajectory, config=asdict(cfg))


def evaluate_topk(result: SearchResult, oracle: OracleParams = OracleParams(),
                  space: SpaceParams = SpaceParams()) -> SearchResult:
    """Score the selected cells with the oracle; best_true_accuracy is their max."""
    if not result.top_k:
        raise ValueError("search result has no candidates")
    seen, specs, preds = set(), [], []
    for spec, p in zip(result.top_k, result.predicted):
        key = archspace.encode(spec, space).tobytes()
        if key not in seen:
            seen.add(key)
            specs.append(spec)
            preds.append(p)
    truth = dataset.label_all(specs, oracle, space)
    return SearchResult(specs, preds, result.trajectory, [float(t) for t in truth],
                        float(truth.max()), dict(result.config))


def random_search_baseline(space: SpaceParams = SpaceParams(), oracle: OracleParams = OracleParams(),
                           budget: int = 10, seed: int = 0, top_k: int = 10) -> float:
    """Best oracle accuracy among a random top_k-sized subset of ``budget`` random cells."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    specs = [archspace.sample_random(rng, space) for _ in range(budget)]
    chosen = rng.choice(budget, size=min(top_k, budget), replace=False)
    return float(dataset.label_all([specs[i] for i in chosen], oracle, space).max())


def reference_pool(n: int = 20_000, seed: int = 0, space: SpaceParams = SpaceParams(),
                   oracle: OracleParams = OracleParams()) -> np.ndarray:
    """Oracle accuracies of ``n`` random cells, for quantile comparisons."""
    rng = np.random.default_rng(seed)
    return dataset.label_all([archspace.sample_random(rng, space) for _ in range(n)], oracle, space)
