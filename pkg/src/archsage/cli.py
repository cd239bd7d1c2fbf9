"""``archsage`` command line: gen-data, train, eval, search, ablate.

Exit codes: 0 success, 2 bad arguments, 3 I/O or file-format problems,
4 numeric failure (non-finite loss, degenerate metrics).
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import benchmark, dataset, evosearch, metrics, trainer
from .archspace import SpaceParams
from .assessor import Distance, GCNConfig, GraphConfig
from .dataset import OracleParams
from .embedder import EmbedderConfig
from .errors import ArchsageError, CheckpointError, DatasetError, DegenerateInput, NonFiniteError
from .evosearch import EAConfig
from .trainer import TrainConfig

log = logging.getLogger("archsage")

EXIT_ARGS, EXIT_IO, EXIT_NUMERIC = 2, 3, 4

SECTIONS = {
    "space": SpaceParams,
    "oracle": OracleParams,
    "train": TrainConfig,
    "graph": GraphConfig,
    "embed": EmbedderConfig,
    "gcn": GCNConfig,
    "ea": EAConfig,
}


class UsageError(Exception):
    pass


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def read_config(path) -> dict:
    """Flat INI document, one section per config dataclass; values are JSON literals."""
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError:
        raise
    except configparser.Error as exc:
        raise UsageError(f"bad config file {path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise UsageError(f"unknown config section [{section}]")
        out[section] = {k: _parse_value(v) for k, v in parser[section].items()}
    return out


def _build(cls, values: dict):
    try:
        return cls(**values)
    except TypeError as exc:
        raise UsageError(f"bad {cls.__name__} settings: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def resolve(file_cfg: dict, overrides: dict) -> dict:
    """Merge file settings with non-None flag overrides, section by section."""
    merged = {name: dict(file_cfg.get(name, {})) for name in SECTIONS}
    for (section, key), value in overrides.items():
        if value is not None:
            merged[section][key] = value
    for name in ("space", "oracle"):
        if "op_vocabulary" in merged[name]:
            merged[name]["op_vocabulary"] = tuple(merged[name]["op_vocabulary"])
        if "op_quality" in merged[name]:
            merged[name]["op_quality"] = tuple(tuple(p) for p in merged[name]["op_quality"])
    if "hidden" in merged["embed"]:
        merged["embed"]["hidden"] = tuple(merged["embed"]["hidden"])
    return merged


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def make_configs(resolved: dict):
    space = _build(SpaceParams, resolved["space"])
    oracle = _build(OracleParams, resolved["oracle"])
    graph = _build(GraphConfig, resolved["graph"])
    embed = _build(EmbedderConfig, {"input_dim": space.feature_dim, **resolved["embed"]})
    gcn = _build(GCNConfig, resolved["gcn"])
    train = _build(TrainConfig, {**resolved["train"], "graph": graph, "embed": embed, "gcn": gcn})
    ea = _build(EAConfig, resolved["ea"])
    return space, oracle, train, ea


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _stamp(resolved: dict) -> dict:
    return {"config": resolved, "config_hash": config_hash(resolved)}


# --- subcommands -------------------------------------------------------------

def cmd_gen_data(args, resolved) -> int:
    space, oracle, _, _ = make_configs(resolved)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if not 0 < args.labeled <= args.n:
        raise UsageError(f"--labeled must lie in [1, --n]; got {args.labeled}")
    ds = dataset.build_dataset(args.n, args.labeled, args.seed, space, oracle)
    ds.meta.update(_stamp(resolved))
    dataset.save_dataset(ds, args.out)
    y = ds.labels[ds.labeled_idx]
    print(f"wrote {args.out}: N={len(ds)} N_l={ds.n_labeled} N_u={ds.n_unlabeled} "
          f"label mean={y.mean():.4f} std={y.std():.4f} min={y.min():.4f} max={y.max():.4f}")
    return 0


def _load_data(path):
    return dataset.load_dataset(path)


def cmd_train(args, resolved) -> int:
    _, _, cfg, _ = make_configs(resolved)
    ds = _load_data(args.data)
    if ds.n_labeled == 0:
        raise UsageError(f"{args.data} has no labeled architectures")
    cfg = replace(cfg, embed=replace(cfg.embed, input_dim=ds.features.shape[1]))

    def report(epoch, row):
        log.info("epoch %d L=%.6g L_rg=%.6g L_rc=%.6g", epoch, row.total, row.regression, row.reconstruction)

    fit = trainer.train_supervised_baseline if args.baseline else trainer.train
    model, history = fit(ds, cfg, on_epoch=report)
    model.save(args.out)
    sidecar_path = args.out + ".json"
    with open(sidecar_path, encoding="utf-8") as fh:
        sidecar = json.load(fh)
    # "config" already holds the TrainConfig the loader needs
    sidecar["run_config"] = resolved
    sidecar["config_hash"] = config_hash(resolved)
    sidecar["baseline"] = bool(args.baseline)
    _write_json(sidecar_path, sidecar)
    history_path = args.history or args.out + ".history.csv"
    lam = 0.0 if args.baseline else cfg.lam
    trainer.write_history(history, history_path, lam)
    with open(history_path, "a", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash(resolved)}\n")
    last = history[-1] if history else None
    print(f"wrote {args.out} (+ .json sidecar) and {history_path}; epochs={len(history)} "
          f"weights: L_rg={1 - lam:g} L_rc={lam:g}"
          + (f" final L={last.total:.6g} L_rg={last.regression:.6g} L_rc={last.reconstruction:.6g}" if last else ""))
    return 0


def _load_model(path):
    return trainer.TrainedAssessor.load(path)


def cmd_eval(args, resolved) -> int:
    model = _load_model(args.model)
    ds = _load_data(args.data)
    held = ds.labeled_only()
    if len(held) < 2:
        raise UsageError(f"{args.data} needs at least 2 labeled architectures for evaluation")
    preds = model.predict(held.specs)
    try:
        rep = metrics.evaluate(preds, held.labels)
    except DegenerateInput as exc:
        raise DegenerateInput(f"{exc} (are all predictions identical? the model may have collapsed)") from None
    out = rep.to_dict()
    out.update(_stamp(resolved))
    out["model"] = os.path.basename(args.model)
    _write_json(args.out, out)
    if args.scatter:
        true_rank = np.argsort(np.argsort(-held.labels, kind="stable"), kind="stable")
        pred_rank = np.argsort(np.argsort(-preds, kind="stable"), kind="stable")
        with open(args.scatter, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["true_rank", "predicted_rank", "true_accuracy", "predicted_accuracy"])
            for k in range(len(preds)):
                w.writerow([int(true_rank[k]), int(pred_rank[k]), repr(float(held.labels[k])), repr(float(preds[k]))])
    print(f"n={rep.n} KTau={rep.ktau:.4f} MSE={rep.mse:.6g} r={rep.pearson_r:.4f} -> {args.out}")
    return 0


def cmd_search(args, resolved) -> int:
    space, oracle, _, ea = make_configs(resolved)
    model = _load_model(args.model)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    runs = []
    for r in range(args.repeats):
        res = evosearch.evolve(model, space, replace(ea, seed=ea.seed + r))
        runs.append(evosearch.evaluate_topk(res, oracle, space))
        log.info("repeat %d best true accuracy %.4f", r, runs[-1].best_true_accuracy)
    best = np.array([r.best_true_accuracy for r in runs])
    out = {
        "runs": [r.to_dict() for r in runs],
        "best_true_accuracy": {"mean": float(best.mean()), "std": float(best.std()),
                               "min": float(best.min()), "max": float(best.max()),
                               "per_seed": [float(b) for b in best]},
    }
    out.update(_stamp(resolved))
    _write_json(args.out, out)
    if args.trajectory:
        with open(args.trajectory, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["repeat", "generation", "best_predicted", "mean_predicted"])
            for k, r in enumerate(runs):
                for g, b, m in r.trajectory:
                    w.writerow([k, g, repr(b), repr(m)])
    print(f"best true accuracy over {args.repeats} repeats: {best.mean():.4f} +- {best.std():.4f} -> {args.out}")
    return 0


AXES = ("sigma", "lambda", "n_unlabeled", "autoencoder", "method")


def _axis_values(axis, raw):
    if axis in ("autoencoder",):
        return [v.lower() in ("1", "on", "true", "yes") for v in raw]
    if axis == "method":
        for v in raw:
            if v not in benchmark.VARIANTS:
                raise UsageError(f"method must be one of {benchmark.VARIANTS}")
        return raw
    try:
        return [int(v) if axis == "n_unlabeled" else float(v) for v in raw]
    except ValueError:
        raise UsageError(f"bad value for axis {axis}: {raw}") from None


def cmd_ablate(args, resolved) -> int:
    space, oracle, cfg, _ = make_configs(resolved)
    values = _axis_values(args.axis, args.values)
    bench = replace(benchmark.BenchmarkConfig(space=space, oracle=oracle), n=args.n,
                    n_labeled=args.labeled, n_eval=args.n_eval)
    h = config_hash({**resolved, "ablate": {"axis": args.axis, "values": [str(v) for v in values],
                                            "seeds": args.seeds, "n": args.n, "labeled": args.labeled,
                                            "n_eval": args.n_eval}})
    rows = []
    for seed in range(args.seed, args.seed + args.seeds):
        data = benchmark.make_benchmark(seed, bench)
        for v in values:
            variant, run_cfg, n_unl = "full", cfg, None
            if args.axis == "sigma":
                run_cfg = replace(cfg, graph=replace(cfg.graph, sigma=v))
            elif args.axis == "lambda":
                run_cfg = replace(cfg, lam=v)
            elif args.axis == "n_unlabeled":
                n_unl = v
            elif args.axis == "autoencoder":
                variant = "full" if v else "no_ae"
            else:
                variant = v
            run = benchmark.run_variant(seed, variant, run_cfg, bench, n_unlabeled=n_unl, data=data)
            log.info("%s=%s seed=%d KTau=%.4f (%.1fs)", args.axis, v, seed, run.report.ktau, run.seconds)
            rows.append([args.axis, str(v), seed, repr(run.report.ktau), repr(run.report.mse),
                         repr(run.report.pearson_r), run.report.n, h])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "value", "seed", "ktau", "mse", "pearson_r", "n_eval", "config_hash"])
        w.writerows(rows)
    for v in values:
        ks = [float(r[3]) for r in rows if r[1] == str(v)]
        print(f"{args.axis}={v}: mean KTau {np.mean(ks):.4f} +- {np.std(ks):.4f} over {len(ks)} seeds")
    return 0


# --- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="archsage", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI file with [space] [oracle] [train] [graph] [embed] [gcn] [ea] sections")
        sp.add_argument("--seed", type=int)
        return sp

    g = common(sub.add_parser("gen-data", help="sample and label a dataset"))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--labeled", type=int, required=True)
    g.add_argument("--noise-std", type=float)
    g.add_argument("--out", required=True)

    def train_flags(sp):
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--sigma", type=float)
        sp.add_argument("--tau", type=float)
        sp.add_argument("--distance", choices=[d.value for d in Distance])
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--pretrain-epochs", type=int)
        sp.add_argument("--batch-size", type=int)
        sp.add_argument("--lr", type=float)
        sp.add_argument("--labeled-ratio", type=float)
        sp.add_argument("--embed-dim", type=int)

    t = common(sub.add_parser("train", help="train an assessor"))
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--history")
    t.add_argument("--baseline", action="store_true", help="supervised-only variant")
    t.add_argument("--no-autoencoder", dest="autoencoder", action="store_false", default=None)
    train_flags(t)

    e = common(sub.add_parser("eval", help="score a model on held-out labeled architectures"))
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--scatter", help="CSV of (true rank, predicted rank) pairs")

    s = common(sub.add_parser("search", help="evolutionary search using a trained model as fitness"))
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--repeats", type=int, default=20)
    s.add_argument("--trajectory")
    s.add_argument("--population-size", type=int)
    s.add_argument("--generations", type=int)
    s.add_argument("--top-k", type=int)
    s.add_argument("--noise-std", type=float)

    a = common(sub.add_parser("ablate", help="sweep one axis over seeds on the synthetic benchmark"))
    a.add_argument("--axis", choices=AXES, required=True)
    a.add_argument("--values", nargs="+", required=True)
    a.add_argument("--seeds", type=int, default=5)
    a.add_argument("--n", type=int, default=3000)
    a.add_argument("--labeled", type=int, default=100)
    a.add_argument("--n-eval", type=int, default=200)
    a.add_argument("--out", required=True)
    train_flags(a)
    return p


def _overrides(args) -> dict:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    ov = {
        ("oracle", "noise_std"): get("noise_std"),
        ("train", "lam"): get("lam"),
        ("train", "epochs"): get("epochs"),
        ("train", "pretrain_epochs"): get("pretrain_epochs"),
        ("train", "batch_size"): get("batch_size"),
        ("train", "lr"): get("lr"),
        ("train", "labeled_ratio"): get("labeled_ratio"),
        ("train", "use_autoencoder"): get("autoencoder"),
        ("graph", "sigma"): get("sigma"),
        ("graph", "tau"): get("tau"),
        ("graph", "distance"): get("distance"),
        ("embed", "embed_dim"): get("embed_dim"),
        ("ea", "population_size"): get("population_size"),
        ("ea", "generations"): get("generations"),
        ("ea", "top_k"): get("top_k"),
    }
    if args.seed is not None:
        ov[("train", "seed")] = args.seed
        ov[("ea", "seed")] = args.seed
        ov[("oracle", "seed")] = None
    return ov


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval,
            "search": cmd_search, "ablate": cmd_ablate}


def _deterministic_context():
    if os.environ.get("ARCHSAGE_DETERMINISTIC") == "1":
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=1)
    return contextlib.nullcontext()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits with 2 on bad usage
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command in ("gen-data", "ablate") and args.seed is None:
        args.seed = 0
    try:
        resolved = resolve(read_config(args.config), _overrides(args))
        if args.command == "gen-data":
            resolved["data"] = {"n": args.n, "labeled": args.labeled, "seed": args.seed}
        with _deterministic_context():
            return COMMANDS[args.command](args, resolved)
    except UsageError as exc:
        print(f"archsage: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (OSError, DatasetError, CheckpointError) as exc:
        print(f"archsage: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, NonFiniteError, DegenerateInput) as exc:
        print(f"archsage: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArchsageError as exc:
        print(f"archsage: error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
