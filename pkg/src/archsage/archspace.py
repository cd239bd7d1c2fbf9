"""DAG cell search space: validation, matrix encoding, and random operators.

A cell is a small DAG whose node 0 is INPUT and whose last node is OUTPUT.
Adjacency is strictly upper-triangular so acyclicity holds by construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError, SamplingExhausted

INPUT = "INPUT"
OUTPUT = "OUTPUT"
CONV1X1 = "CONV1X1"
CONV3X3 = "CONV3X3"
MAXPOOL3X3 = "MAXPOOL3X3"

INTERIOR_OPS = (CONV1X1, CONV3X3, MAXPOOL3X3)

DEFAULT_ATTEMPTS = 1000


class Validation(enum.Enum):
    OK = "OK"
    REJECT_SHAPE = "REJECT_SHAPE"
    REJECT_BAD_OP = "REJECT_BAD_OP"
    REJECT_TOO_MANY_NODES = "REJECT_TOO_MANY_NODES"
    REJECT_CYCLE_SHAPE = "REJECT_CYCLE_SHAPE"
    REJECT_TOO_MANY_EDGES = "REJECT_TOO_MANY_EDGES"
    REJECT_NO_PATH = "REJECT_NO_PATH"
    REJECT_DANGLING = "REJECT_DANGLING"

    def __bool__(self):
        return self is Validation.OK


@dataclass(frozen=True)
class SpaceParams:
    max_nodes: int = 7
    max_edges: int = 9
    # code of label k is its index; NONE=0 is reserved for padding / no edge
    op_vocabulary: tuple = ("NONE", INPUT, CONV1X1, CONV3X3, MAXPOOL3X3, OUTPUT)

    def __post_init__(self):
        if self.max_nodes < 2:
            raise ValueError("max_nodes must be >= 2")
        if self.max_edges < 1:
            raise ValueError("max_edges must be >= 1")
        if len(set(self.op_vocabulary)) != len(self.op_vocabulary) or self.op_vocabulary[0] != "NONE":
            raise ValueError("op_vocabulary must start with NONE and have distinct labels")

    def code(self, op: str) -> int:
        return self.op_vocabulary.index(op)

    @property
    def max_op_code(self) -> int:
        return len(self.op_vocabulary) - 1

    @property
    def feature_dim(self) -> int:
        return self.max_nodes * self.max_nodes + self.max_nodes


@dataclass(frozen=True, eq=False)
class CellSpec:
    """One architecture: binary adjacency plus one op label per node."""

    adjacency: np.ndarray
    ops: tuple = field(default=())

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=np.int8)
        if adj.ndim != 2:
            adj = adj.reshape(len(self.ops), len(self.ops)) if adj.size == len(self.ops) ** 2 else adj
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "ops", tuple(self.ops))

    @property
    def num_nodes(self) -> int:
        return len(self.ops)

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum())

    def key(self) -> tuple:
        return (self.adjacency.shape, self.adjacency.tobytes(), self.ops)

    def __eq__(self, other):
        if not isinstance(other, CellSpec):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        edges = [tuple(map(int, e)) for e in zip(*np.nonzero(self.adjacency))]
        return f"CellSpec(ops={list(self.ops)}, edges={edges})"

    def to_dict(self) -> dict:
        return {"adjacency": self.adjacency.astype(int).tolist(), "ops": list(self.ops)}

    @classmethod
    def from_dict(cls, d: dict) -> "CellSpec":
        return cls(np.asarray(d["adjacency"], dtype=np.int8), tuple(d["ops"]))


def _live_mask(adj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward reachability from node 0 and backward reachability to node V-1."""
    v = adj.shape[0]
    fwd = np.zeros(v, dtype=bool)
    bwd = np.zeros(v, dtype=bool)
    fwd[0] = True
    for j in range(1, v):
        fwd[j] = bool(np.any(adj[:j, j] & fwd[:j]))
    bwd[v - 1] = True
    for i in range(v - 2, -1, -1):
        bwd[i] = bool(np.any(adj[i, i + 1:] & bwd[i + 1:]))
    return fwd, bwd


def validate(spec: CellSpec, params: SpaceParams = SpaceParams()) -> Validation:
    adj, ops = spec.adjacency, spec.ops
    v = len(ops)
    if adj.ndim != 2 or adj.shape != (v, v) or v < 2:
        return Validation.REJECT_SHAPE
    if not np.isin(adj, (0, 1)).all():
        return Validation.REJECT_SHAPE
    if ops[0] != INPUT or ops[-1] != OUTPUT:
        return Validation.REJECT_BAD_OP
    if any(op not in INTERIOR_OPS or op not in params.op_vocabulary for op in ops[1:-1]):
        return Validation.REJECT_BAD_OP
    if v > params.max_nodes:
        return Validation.REJECT_TOO_MANY_NODES
    if np.tril(adj).any():
        return Validation.REJECT_CYCLE_SHAPE
    if spec.num_edges > params.max_edges:
        return Validation.REJECT_TOO_MANY_EDGES
    fwd, bwd = _live_mask(adj)
    if not fwd[v - 1]:
        return Validation.REJECT_NO_PATH
    touched = adj.any(axis=0) | adj.any(axis=1)
    if np.any(touched & ~(fwd & bwd)):
        return Validation.REJECT_DANGLING
    return Validation.OK


def check(spec: CellSpec, params: SpaceParams = SpaceParams()) -> None:
    result = validate(spec, params)
    if not result:
        raise InvalidSpecError(result, repr(spec))


def prune(spec: CellSpec) -> CellSpec:
    """Drop every node that is not on some INPUT->OUTPUT path.

    If no such path exists the spec is returned unchanged (validation will
    reject it).
    """
    adj = spec.adjacency
    fwd, bwd = _live_mask(adj)
    if not fwd[-1]:
        return spec
    keep = np.flatnonzero(fwd & bwd)
    if len(keep) == len(spec.ops):
        return spec
    return CellSpec(adj[np.ix_(keep, keep)], tuple(spec.ops[i] for i in keep))


def encode(spec: CellSpec, params: SpaceParams = SpaceParams()) -> np.ndarray:
    """Positional matrix encoding scaled into [0, 1].

    Entry (i, j) of the padded adjacency holds the op code of node j when the
    edge i->j exists; the op codes of all nodes follow.  No canonicalization
    is applied, so isomorphic cells with different node orders differ.
    """
    check(spec, params)
    m = params.max_nodes
    codes = np.array([params.code(op) for op in spec.ops], dtype=np.float64)
    v = len(codes)
    mat = np.zeros((m, m))
    mat[:v, :v] = spec.adjacency * codes[None, :]
    tail = np.zeros(m)
    tail[:v] = codes
    return np.concatenate([mat.ravel(), tail]) / params.max_op_code


def decode(vec: np.ndarray, params: SpaceParams = SpaceParams()) -> CellSpec:
    """Inverse of :func:`encode`."""
    m = params.max_nodes
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (params.feature_dim,):
        raise ValueError(f"expected vector of length {params.feature_dim}, got {vec.shape}")
    raw = np.rint(vec * params.max_op_code).astype(int)
    tail = raw[m * m:]
    v = int(np.count_nonzero(tail))
    ops = tuple(params.op_vocabulary[c] for c in tail[:v])
    adj = (raw[: m * m].reshape(m, m)[:v, :v] != 0).astype(np.int8)
    return CellSpec(adj, ops)


def encode_batch(specs, params: SpaceParams = SpaceParams()) -> np.ndarray:
    if not specs:
        return np.zeros((0, params.feature_dim))
    return np.stack([encode(s, params) for s in specs])


def _pad(spec: CellSpec, m: int, fill_ops) -> tuple[np.ndarray, list]:
    """Embed a cell into an m-node frame, inserting edge-free nodes before OUTPUT."""
    v = spec.num_nodes
    adj = np.zeros((m, m), dtype=np.int8)
    adj[: v - 1, : v - 1] = spec.adjacency[: v - 1, : v - 1]
    adj[: v - 1, m - 1] = spec.adjacency[: v - 1, v - 1]
    ops = list(spec.ops[:-1]) + list(fill_ops) + [OUTPUT]
    return adj, ops


def sample_random(rng: np.random.Generator, params: SpaceParams = SpaceParams(),
                  attempts: int = DEFAULT_ATTEMPTS, extra_edge_prob: float = 0.2) -> CellSpec:
    """Draw a valid cell.

    The node count V is drawn from [3, max_nodes] with weight 2**V, so larger
    cells dominate as they do in the full space.  Every interior node gets a
    random parent and child, which keeps all nodes live; extra edges are
    added independently and over-budget draws are rejected.
    """
    m = params.max_nodes
    sizes = np.arange(min(3, m), m + 1)
    weights = 2.0 ** sizes
    v = int(rng.choice(sizes, p=weights / weights.sum()))
    iu = np.triu_indices(v, k=1)
    for _ in range(attempts):
        adj = np.zeros((v, v), dtype=np.int8)
        adj[iu] = rng.random(len(iu[0])) < extra_edge_prob
        for j in range(1, v):
            if not adj[:j, j].any():
                adj[rng.integers(0, j), j] = 1
        for i in range(v - 1):
            if not adj[i, i + 1:].any():
                adj[i, rng.integers(i + 1, v)] = 1
        interior = rng.integers(0, len(INTERIOR_OPS), size=v - 2)
        spec = CellSpec(adj, (INPUT, *(INTERIOR_OPS[k] for k in interior), OUTPUT))
        if validate(spec, params):
            return spec
    raise SamplingExhausted(f"no valid cell after {attempts} attempts")


def mutate(spec: CellSpec, rng: np.random.Generator, rate: float,
           params: SpaceParams = SpaceParams(), attempts: int = DEFAULT_ATTEMPTS) -> CellSpec:
    """Resample interior ops and edge slots, each with probability ``rate``.

    A chosen edge slot is redrawn as a fair coin, so ``rate=1`` is a full
    resample.  Mutation happens in the padded max_nodes frame so cells can
    grow; the candidate is pruned and rejected until valid.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    check(spec, params)
    if rate == 0.0:
        return spec
    m = params.max_nodes
    iu = np.triu_indices(m, k=1)
    for _ in range(attempts):
        fill = [INTERIOR_OPS[k] for k in rng.integers(0, len(INTERIOR_OPS), size=m - spec.num_nodes)]
        adj, ops = _pad(spec, m, fill)
        chosen = rng.random(len(iu[0])) < rate
        redraw = (rng.random(len(iu[0])) < 0.5).astype(np.int8)
        adj[iu] = np.where(chosen, redraw, adj[iu])
        resample = rng.random(m - 2) < rate
        new_ops = rng.integers(0, len(INTERIOR_OPS), size=m - 2)
        for k in np.flatnonzero(resample):
            ops[k + 1] = INTERIOR_OPS[new_ops[k]]
        child = prune(CellSpec(adj, ops))
        if validate(child, params):
            return child
    raise SamplingExhausted(f"mutation found no valid cell after {attempts} attempts")


def crossover(a: CellSpec, b: CellSpec, rng: np.random.Generator,
              params: SpaceParams = SpaceParams(), attempts: int = DEFAULT_ATTEMPTS) -> CellSpec:
    """Uniform crossover per edge slot and per op slot in the padded frame.

    Padding slots of the smaller parent borrow the other parent's op so every
    child op comes from one of the parents.
    """
    check(a, params)
    check(b, params)
    if a == b:
        return a
    m = params.max_nodes
    adj_a, ops_a = _pad(a, m, [None] * (m - a.num_nodes))
    adj_b, ops_b = _pad(b, m, [None] * (m - b.num_nodes))
    for k in range(m):
        if ops_a[k] is None:
            ops_a[k] = ops_b[k] if ops_b[k] is not None else CONV3X3
        if ops_b[k] is None:
            ops_b[k] = ops_a[k]
    iu = np.triu_indices(m, k=1)
    for _ in range(attempts):
        take_a = rng.random(len(iu[0])) < 0.5
        adj = np.zeros((m, m), dtype=np.int8)
        adj[iu] = np.where(take_a, adj_a[iu], adj_b[iu])
        op_from_a = rng.random(m) < 0.5
        ops = [oa if fa else ob for oa, ob, fa in zip(ops_a, ops_b, op_from_a)]
        child = prune(CellSpec(adj, ops))
        if validate(child, params):
            return child
    raise SamplingExhausted(f"crossover found no valid cell after {attempts} attempts")


def longest_path(spec: CellSpec, weights: dict | None = None) -> float:
    """Max over INPUT->OUTPUT paths of the summed interior-node weights.

    With ``weights=None`` every interior node counts 1, giving the number of
    interior nodes on the longest path.
    """
    adj = spec.adjacency
    v = spec.num_nodes
    w = np.array([0.0 if op in (INPUT, OUTPUT) else (1.0 if weights is None else weights[op])
                  for op in spec.ops])
    best = np.full(v, -np.inf)
    best[0] = 0.0
    for j in range(1, v):
        preds = np.flatnonzero(adj[:j, j])
        if len(preds):
            best[j] = best[preds].max() + w[j]
    return float(best[v - 1])
