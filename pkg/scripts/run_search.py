"""Evolutionary search driven by a trained assessor vs. random search.

    python3 scripts/run_search.py --seeds 5

For each seed, trains the full model on the benchmark, evolves with the
model as fitness, and scores the top-10 cells with the oracle.  Also reports
the same search with the oracle itself as fitness, as an upper reference.
"""

import argparse

import numpy as np

from archsage import benchmark, evosearch


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--generations", type=int, default=evosearch.EAConfig().generations)
    p.add_argument("--pool", type=int, default=20_000)
    args = p.parse_args()

    pool = evosearch.reference_pool(args.pool, seed=123)
    q95 = np.quantile(pool, 0.95)
    print(f"reference pool of {args.pool}: 95th percentile {q95:.4f}, max {pool.max():.4f}")
    found, rand, ideal = [], [], []
    for seed in range(args.seeds):
        cfg = evosearch.EAConfig(seed=seed, generations=args.generations)
        model = benchmark.run_variant(seed, "full").model
        found.append(evosearch.evaluate_topk(evosearch.evolve(model, cfg=cfg)).best_true_accuracy)
        ideal.append(evosearch.evaluate_topk(evosearch.evolve(evosearch.oracle_fitness(), cfg=cfg)).best_true_accuracy)
        rand.append(evosearch.random_search_baseline(budget=cfg.top_k, seed=seed, top_k=cfg.top_k))
        print(f"seed {seed}: assessor EA {found[-1]:.4f}  oracle EA {ideal[-1]:.4f}  random {rand[-1]:.4f}", flush=True)
    print(f"mean: assessor EA {np.mean(found):.4f}  oracle EA {np.mean(ideal):.4f}  random {np.mean(rand):.4f}")


if __name__ == "__main__":
    main()
