"""Held-out KTau as training progresses, for each variant.

    python3 scripts/learning_curves.py --seeds 3 --epochs 60 --every 5

Useful for telling overfitting apart from a missing semi-supervised effect:
prints the seed-averaged KTau every ``--every`` epochs.
"""

import argparse
from dataclasses import replace

import numpy as np

from archsage import archspace, benchmark, metrics, trainer
from archsage import numcore as nc
from archsage.trainer import TrainConfig, TrainedAssessor


class _Recording(nc.Adam):
    """Adam that remembers the live parameter dict it updates."""

    live = None

    def step(self, params, grads):
        super().step(params, grads)
        _Recording.live = params


def curve(ds, eval_x, eval_y, cfg, identity, every):
    known = ds.labels[ds.labeled_idx]
    shift, scale = float(known.mean()), float(known.std())
    points = []

    def on_epoch(epoch, _row):
        if (epoch + 1) % every == 0:
            model = TrainedAssessor(_Recording.live, cfg, ds.features[ds.labeled_idx], ds.labeled_idx,
                                    ds.space, identity, shift, scale)
            points.append(metrics.kendall_tau(model.predict_features(eval_x), eval_y))

    original, trainer.nc.Adam = trainer.nc.Adam, _Recording
    try:
        trainer._fit(ds, cfg, identity, on_epoch=on_epoch)
    finally:
        trainer.nc.Adam = original
    return points


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--every", type=int, default=5)
    args = p.parse_args()

    variants = {"full": (False, {}), "lam0": (False, {"lam": 0.0}), "no_ae": (False, {"use_autoencoder": False}),
                "baseline": (True, {"lam": 0.0})}
    for name, (identity, over) in variants.items():
        curves = []
        for seed in range(args.seeds):
            ds, specs, y = benchmark.make_benchmark(seed)
            if identity:
                ds = ds.labeled_only()
            cfg = replace(TrainConfig(), seed=seed, epochs=args.epochs, **over)
            x = archspace.encode_batch(specs)
            curves.append(curve(ds, x, y, cfg, identity, args.every))
        print(f"{name:9s}", " ".join(f"{v:.3f}" for v in np.mean(curves, axis=0)))


if __name__ == "__main__":
    main()
