"""Architecture datasets and the deterministic synthetic performance oracle."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import archspace
from .archspace import CellSpec, SpaceParams
from .errors import InvalidSpecError, ParseError, SchemaError


@dataclass(frozen=True)
class OracleParams:
    seed: int = 0
    noise_std: float = 0.005
    base: float = 0.80
    w_path: float = 0.10
    w_skip: float = 0.03
    w_edges: float = 0.02
    w_pool: float = 0.01
    # per-op contribution to the longest-path quality
    op_quality: tuple = (("CONV1X1", 0.6), ("CONV3X3", 1.0), ("MAXPOOL3X3", 0.3))

    def __post_init__(self):
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be >= 0")


def _hash_normal(spec: CellSpec, seed: int) -> float:
    """Standard normal draw that is a pure function of (spec, seed)."""
    payload = json.dumps([spec.to_dict(), int(seed)], sort_keys=True).encode()
    digest = hashlib.sha256(payload).digest()
    a, b = np.frombuffer(digest[:16], dtype="<u8")
    u1 = (int(a >> np.uint64(11)) + 0.5) / 2.0 ** 53
    u2 = (int(b >> np.uint64(11)) + 0.5) / 2.0 ** 53
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def oracle_terms(spec: CellSpec, space: SpaceParams = SpaceParams(), params: OracleParams = OracleParams()) -> dict:
    """The noise-free structural features the oracle combines."""
    v = spec.num_nodes
    quality = archspace.longest_path(spec, dict(params.op_quality))
    return {
        "path_quality": quality / max(space.max_nodes - 2, 1),
        "skip": float(spec.adjacency[0, v - 1]),
        "edge_excess": max(0, spec.num_edges - (v - 1)) / space.max_edges,
        "pool": float("MAXPOOL3X3" in spec.ops),
    }


def synth_performance(spec: CellSpec, params: OracleParams = OracleParams(),
                      space: SpaceParams = SpaceParams()) -> float:
    """Synthetic accuracy in [0, 1].

    Rewards a long path through strong ops plus a short INPUT->OUTPUT skip,
    penalizes edges beyond a tree, and adds hash-seeded Gaussian noise.
    """
    archspace.check(spec, space)
    t = oracle_terms(spec, space, params)
    acc = (params.base + params.w_path * t["path_quality"] + params.w_skip * t["skip"]
           - params.w_edges * t["edge_excess"] + params.w_pool * t["pool"])
    if params.noise_std > 0:
        acc += params.noise_std * _hash_normal(spec, params.seed)
    return min(1.0, max(0.0, acc))


@dataclass(eq=False)
class ArchDataset:
    specs: tuple
    features: np.ndarray
    labels: np.ndarray  # NaN marks an unlabeled entry
    space: SpaceParams = field(default_factory=SpaceParams)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.specs = tuple(self.specs)
        self.features = np.asarray(self.features, dtype=np.float64).reshape(len(self.specs), -1)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if len(self.labels) != len(self.specs):
            raise ValueError("labels and specs differ in length")
        known = self.labels[~np.isnan(self.labels)]
        if np.any((known < 0) | (known > 1)):
            raise ValueError("labels must lie in [0, 1]")

    def __len__(self):
        return len(self.specs)

    @property
    def labeled_mask(self) -> np.ndarray:
        return ~np.isnan(self.labels)

    @property
    def labeled_idx(self) -> np.ndarray:
        return np.flatnonzero(self.labeled_mask)

    @property
    def unlabeled_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.labeled_mask)

    @property
    def n_labeled(self) -> int:
        return int(self.labeled_mask.sum())

    @property
    def n_unlabeled(self) -> int:
        return len(self) - self.n_labeled

    def subset(self, idx) -> "ArchDataset":
        idx = np.asarray(idx, dtype=int)
        return ArchDataset([self.specs[i] for i in idx], self.features[idx], self.labels[idx],
                           self.space, dict(self.meta))

    def labeled_only(self) -> "ArchDataset":
        return self.subset(self.labeled_idx)

    def __eq__(self, other):
        if not isinstance(other, ArchDataset):
            return NotImplemented
        return (self.specs == other.specs and self.space == other.space
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels, equal_nan=True))


def from_specs(specs, labels=None, space: SpaceParams = SpaceParams(), meta=None) -> ArchDataset:
    specs = list(specs)
    if labels is None:
        labels = np.full(len(specs), np.nan)
    return ArchDataset(specs, archspace.encode_batch(specs, space), labels, space, dict(meta or {}))


def build_dataset(n: int, n_labeled: int, seed: int, space: SpaceParams = SpaceParams(),
                  oracle: OracleParams = OracleParams()) -> ArchDataset:
    """Sample ``n`` cells and label a uniformly random subset of ``n_labeled``."""
    if not 0 < n_labeled <= n:
        raise ValueError(f"need 0 < n_labeled <= n, got n_labeled={n_labeled}, n={n}")
    rng = np.random.default_rng(seed)
    specs = [archspace.sample_random(rng, space) for _ in range(n)]
    labeled = np.sort(rng.choice(n, size=n_labeled, replace=False))
    labels = np.full(n, np.nan)
    for i in labeled:
        labels[i] = synth_performance(specs[i], oracle, space)
    meta = {"n": n, "n_labeled": n_labeled, "seed": seed, "space": asdict(space), "oracle": asdict(oracle)}
    return from_specs(specs, labels, space, meta)


def label_all(specs, oracle: OracleParams = OracleParams(), space: SpaceParams = SpaceParams()) -> np.ndarray:
    return np.array([synth_performance(s, oracle, space) for s in specs])


def save_dataset(ds: ArchDataset, path) -> None:
    """Write JSON lines; an optional ``#``-prefixed header holds metadata."""
    header = dict(ds.meta)
    header["space"] = asdict(ds.space)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        for spec, y in zip(ds.specs, ds.labels):
            rec = spec.to_dict()
            rec["accuracy"] = None if np.isnan(y) else float(y)
            fh.write(json.dumps(rec) + "\n")


def _space_from(d: dict) -> SpaceParams:
    return SpaceParams(max_nodes=d["max_nodes"], max_edges=d["max_edges"],
                       op_vocabulary=tuple(d["op_vocabulary"]))


def load_dataset(path) -> ArchDataset:
    specs, labels = [], []
    meta, space = {}, SpaceParams()
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if lineno == 1:
                try:
                    meta = json.loads(line[1:])
                except json.JSONDecodeError as exc:
                    raise ParseError(lineno, f"bad header: {exc}") from None
                if "space" in meta:
                    space = _space_from(meta["space"])
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, str(exc)) from None
        if not isinstance(rec, dict) or not {"adjacency", "ops", "accuracy"} <= rec.keys():
            raise SchemaError(lineno, "record needs adjacency, ops and accuracy")
        acc = rec["accuracy"]
        if acc is not None:
            if isinstance(acc, bool) or not isinstance(acc, (int, float)) or not 0.0 <= acc <= 1.0:
                raise SchemaError(lineno, f"accuracy {acc!r} outside [0, 1]")
        try:
            spec = CellSpec.from_dict(rec)
        except (TypeError, ValueError) as exc:
            raise SchemaError(lineno, f"malformed cell: {exc}") from None
        verdict = archspace.validate(spec, space)
        if not verdict:
            raise SchemaError(lineno, f"invalid cell ({verdict.name})")
        specs.append(spec)
        labels.append(np.nan if acc is None else float(acc))
    meta.pop("space", None)
    try:
        return from_specs(specs, np.array(labels, dtype=np.float64), space, meta)
    except InvalidSpecError as exc:  # pragma: no cover - validated above
        raise SchemaError(0, str(exc)) from None
