"""The standard synthetic benchmark shared by the ablation driver and tests.

A benchmark instance for seed ``s`` is a 3000-cell training set with 100
labels plus 200 independently sampled, oracle-labeled evaluation cells.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import archspace, dataset, metrics, trainer
from .archspace import SpaceParams
from .dataset import OracleParams
from .trainer import TrainConfig

VARIANTS = ("full", "baseline", "no_ae")

# offset keeps evaluation cells on a different random stream than training cells
_EVAL_STREAM = 1_000_003


@dataclass(frozen=True)
class BenchmarkConfig:
    n: int = 3000
    n_labeled: int = 100
    n_eval: int = 200
    transductive: bool = True  # evaluation cells are drawn from the unlabeled pool
    space: SpaceParams = SpaceParams()
    oracle: OracleParams = OracleParams()


@dataclass
class BenchmarkRun:
    variant: str
    seed: int
    report: metrics.MetricsReport
    seconds: float
    model: trainer.TrainedAssessor
    history: list


def make_benchmark(seed: int, bench: BenchmarkConfig = BenchmarkConfig()):
    """Returns (training dataset, eval specs, eval labels)."""
    train_ds = dataset.build_dataset(bench.n, bench.n_labeled, seed, bench.space, bench.oracle)
    rng = np.random.default_rng(_EVAL_STREAM + seed)
    if bench.transductive:
        pick = np.sort(rng.choice(train_ds.unlabeled_idx, size=bench.n_eval, replace=False))
        eval_specs = [train_ds.specs[i] for i in pick]
    else:
        eval_specs = [archspace.sample_random(rng, bench.space) for _ in range(bench.n_eval)]
    eval_labels = dataset.label_all(eval_specs, bench.oracle, bench.space)
    return train_ds, eval_specs, eval_labels


def limit_unlabeled(ds, n_unlabeled: int):
    """Keep all labeled rows and the first ``n_unlabeled`` unlabeled rows."""
    keep = np.sort(np.concatenate([ds.labeled_idx, ds.unlabeled_idx[:n_unlabeled]]))
    return ds.subset(keep)


def run_variant(seed: int, variant: str = "full", cfg: TrainConfig | None = None,
                bench: BenchmarkConfig = BenchmarkConfig(), n_unlabeled: int | None = None,
                data=None) -> BenchmarkRun:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    cfg = replace(cfg or TrainConfig(), seed=seed)
    train_ds, eval_specs, eval_labels = data if data is not None else make_benchmark(seed, bench)
    if n_unlabeled is not None:
        train_ds = limit_unlabeled(train_ds, n_unlabeled)
    start = time.perf_counter()
    if variant == "baseline":
        model, history = trainer.train_supervised_baseline(train_ds, cfg)
    else:
        if variant == "no_ae":
            cfg = replace(cfg, use_autoencoder=False)
        model, history = trainer.train(train_ds, cfg)
    preds = model.predict(eval_specs)
    elapsed = time.perf_counter() - start
    return BenchmarkRun(variant, seed, metrics.evaluate(preds, eval_labels), elapsed, model, history)
