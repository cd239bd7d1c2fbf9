import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from archsage import archspace, dataset, evosearch
from archsage.archspace import CellSpec, SpaceParams, Validation
from archsage.evosearch import EAConfig

SMALL = EAConfig(population_size=20, generations=8, top_k=5, seed=0)


def structural(specs):
    """Deterministic stand-in predictor: the noise-free oracle."""
    return dataset.label_all(specs, dataset.OracleParams(noise_std=0.0))


def enumerate_space(space):
    """Every valid cell of a tiny space, by brute force."""
    out = set()
    for v in range(2, space.max_nodes + 1):
        slots = list(zip(*np.triu_indices(v, 1)))
        for bits in itertools.product((0, 1), repeat=len(slots)):
            adj = np.zeros((v, v), dtype=int)
            for (i, j), b in zip(slots, bits):
                adj[i, j] = b
            for mid in itertools.product(archspace.INTERIOR_OPS, repeat=v - 2):
                spec = CellSpec(adj, ["INPUT", *mid, "OUTPUT"])
                if archspace.validate(spec, space) is Validation.OK:
                    out.add(spec)
    return sorted(out, key=lambda s: s.key())


def test_config_validation():
    with pytest.raises(ValueError):
        EAConfig(population_size=5, top_k=10)
    with pytest.raises(ValueError):
        EAConfig(mutation_rate=1.5)
    with pytest.raises(ValueError):
        EAConfig(elitism=100)


def test_zero_generations_ranks_initial_population():
    cfg = replace(SMALL, generations=0)
    res = evosearch.evolve(structural, cfg=cfg)
    rng = np.random.default_rng(cfg.seed)
    init = [archspace.sample_random(rng) for _ in range(cfg.population_size)]
    fit = structural(init)
    best = sorted({s: f for s, f in zip(init, fit)}.items(), key=lambda kv: -kv[1])[:cfg.top_k]
    assert res.top_k == [s for s, _ in best]
    assert len(res.trajectory) == 1


def test_top_k_sorted_and_distinct():
    res = evosearch.evolve(structural, cfg=SMALL)
    assert len(res.top_k) == SMALL.top_k == len(set(res.top_k))
    assert res.predicted == sorted(res.predicted, reverse=True)


def test_elite_fitness_non_decreasing():
    res = evosearch.evolve(structural, cfg=replace(SMALL, generations=20))
    best = [b for _, b, _ in res.trajectory]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))


def test_same_seed_same_result():
    a = evosearch.evolve(structural, cfg=SMALL).to_dict()
    b = evosearch.evolve(structural, cfg=SMALL).to_dict()
    assert a == b


def test_every_candidate_valid():
    seen = []

    def checking(specs):
        seen.extend(specs)
        return structural(specs)

    evosearch.evolve(checking, cfg=SMALL)
    assert seen and all(archspace.validate(s) is Validation.OK for s in seen)


def test_predictor_called_in_population_sized_batches():
    sizes = []

    def counting(specs):
        sizes.append(len(specs))
        return structural(specs)

    evosearch.evolve(counting, cfg=SMALL)
    assert max(sizes) <= SMALL.population_size


def test_evaluate_singleton():
    spec = archspace.sample_random(np.random.default_rng(3))
    res = evosearch.SearchResult([spec], [0.5], [])
    out = evosearch.evaluate_topk(res)
    assert out.best_true_accuracy == dataset.synth_performance(spec)


def test_evaluate_best_is_max():
    out = evosearch.evaluate_topk(evosearch.evolve(structural, cfg=SMALL))
    assert all(out.best_true_accuracy >= t for t in out.true_accuracy)
    assert out.best_true_accuracy in out.true_accuracy


def test_evaluate_dedupes_by_encoding():
    spec = archspace.sample_random(np.random.default_rng(4))
    out = evosearch.evaluate_topk(evosearch.SearchResult([spec, spec], [0.9, 0.9], []))
    assert len(out.top_k) == 1


def test_evaluate_empty():
    with pytest.raises(ValueError):
        evosearch.evaluate_topk(evosearch.SearchResult([], [], []))


def test_perfect_assessor_finds_pool_maximum():
    space = SpaceParams(max_nodes=4, max_edges=9)
    oracle = dataset.OracleParams(seed=3)
    pool = enumerate_space(space)
    truth = dataset.label_all(pool, oracle, space)
    cfg = EAConfig(population_size=30, generations=30, top_k=5, mutation_rate=0.3, seed=1)
    res = evosearch.evaluate_topk(evosearch.evolve(evosearch.oracle_fitness(oracle, space), space, cfg), oracle, space)
    assert res.best_true_accuracy == truth.max()


def test_random_search_budget_one():
    rng = np.random.default_rng(6)
    only = archspace.sample_random(rng)
    assert evosearch.random_search_baseline(budget=1, seed=6) == dataset.synth_performance(only)


def test_random_search_deterministic_and_bad_budget():
    assert evosearch.random_search_baseline(budget=30, seed=2) == evosearch.random_search_baseline(budget=30, seed=2)
    with pytest.raises(ValueError):
        evosearch.random_search_baseline(budget=0)


def test_random_search_monotone_in_expectation():
    means = [np.mean([evosearch.random_search_baseline(budget=b, seed=s) for s in range(100)]) for b in (1, 5, 10)]
    assert means[0] <= means[1] <= means[2]


def test_oracle_fitness_search_beats_random():
    ea = [evosearch.evaluate_topk(evosearch.evolve(evosearch.oracle_fitness(), cfg=replace(SMALL, seed=s))).best_true_accuracy
          for s in range(5)]
    rs = [evosearch.random_search_baseline(budget=SMALL.top_k, seed=s) for s in range(5)]
    assert np.mean(ea) >= np.mean(rs)


def test_result_serialization(tmp_path):
    res = evosearch.evaluate_topk(evosearch.evolve(structural, cfg=SMALL))
    d = res.to_dict()
    assert {"predicted", "true_accuracy", "adjacency", "ops"} <= d["top_k"][0].keys()
    assert len(d["trajectory"]) == SMALL.generations + 1
    path = tmp_path / "traj.csv"
    res.write_trajectory(path)
    assert path.read_text().splitlines()[0] == "generation,best_predicted,mean_predicted"


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_search_deterministic_per_seed(seed):
    cfg = EAConfig(population_size=10, generations=3, top_k=3, seed=seed)
    assert evosearch.evolve(structural, cfg=cfg).top_k == evosearch.evolve(structural, cfg=cfg).top_k
