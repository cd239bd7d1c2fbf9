"""RBF relation graph over embeddings and the two-layer GCN regressor.

The graph is differentiable with respect to the embeddings: thresholded
entries carry zero gradient, kept entries use the RBF derivative, and the
symmetric degree normalization is differentiated exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .errors import EmptyLabeledError, ShapeMismatch

_NORM_FLOOR = 1e-12


class Distance(str, enum.Enum):
    SQUARED_EUCLIDEAN = "squared_euclidean"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class GraphConfig:
    sigma: float = 0.01
    tau: float = 1e-5
    distance: Distance = Distance.SQUARED_EUCLIDEAN
    normalize: bool = True  # l2-normalize embedding rows before measuring distance

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")
        object.__setattr__(self, "distance", Distance(self.distance))


@dataclass
class RelationGraph:
    A: np.ndarray
    A_hat: np.ndarray
    degrees: np.ndarray
    # kept for the backward pass
    points: np.ndarray = None
    sim: np.ndarray = None
    keep: np.ndarray = None
    dist: np.ndarray = None
    norms: np.ndarray = None

    @property
    def n(self) -> int:
        return len(self.A)


def _distance(d2, cfg):
    return d2 if cfg.distance is Distance.SQUARED_EUCLIDEAN else np.sqrt(d2)


def similarity(e_i, e_j, cfg: GraphConfig = GraphConfig()) -> float:
    """exp(-d(e_i, e_j) / (2 sigma^2)) on the raw vectors given."""
    e_i, e_j = np.asarray(e_i, float), np.asarray(e_j, float)
    if e_i.shape != e_j.shape:
        raise ShapeMismatch(f"similarity: {e_i.shape} vs {e_j.shape}")
    diff = e_i - e_j
    d = _distance(float(diff @ diff), cfg)
    return float(np.exp(-d / (2.0 * cfg.sigma ** 2)))


def normalize_rows(emb):
    norms = np.maximum(np.linalg.norm(emb, axis=1), _NORM_FLOOR)
    return emb / norms[:, None], norms


def normalize_rows_backward(dpoints, points, norms):
    proj = np.sum(dpoints * points, axis=1, keepdims=True)
    return (dpoints - points * proj) / norms[:, None]


def _pairwise_sq(points):
    sq = np.sum(points * points, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    d2 = np.maximum(d2, 0.0)
    # mirror the upper triangle so A is exactly symmetric
    iu = np.triu_indices(len(points), k=1)
    d2[(iu[1], iu[0])] = d2[iu]
    np.fill_diagonal(d2, 0.0)
    return d2


def build_graph(emb, cfg: GraphConfig = GraphConfig()) -> RelationGraph:
    """A_ij = s_ij where s_ij > tau (else 0), A_ii = 1, A_hat = D^-1/2 A D^-1/2."""
    emb = np.asarray(emb, dtype=np.float64)
    nc.ensure_finite(emb, where="build_graph")
    if cfg.normalize:
        points, norms = normalize_rows(emb)
    else:
        points, norms = emb, None
    d2 = _pairwise_sq(points)
    dist = _distance(d2, cfg)
    sim = np.exp(-dist / (2.0 * cfg.sigma ** 2))
    keep = sim > cfg.tau
    np.fill_diagonal(keep, False)
    A = np.where(keep, sim, 0.0)
    np.fill_diagonal(A, 1.0)
    deg = A.sum(axis=1)
    r = 1.0 / np.sqrt(deg)
    A_hat = A * r[:, None] * r[None, :]
    return RelationGraph(A, A_hat, deg, points, sim, keep, dist, norms)


def identity_graph(n: int) -> RelationGraph:
    eye = np.eye(n)
    return RelationGraph(eye, eye.copy(), np.ones(n))


def build_graph_backward(dA_hat, graph: RelationGraph, cfg: GraphConfig = GraphConfig()):
    """Gradient of a scalar loss with respect to the embedding rows."""
    A, deg, r = graph.A, graph.degrees, 1.0 / np.sqrt(graph.degrees)
    # A_hat_ij = A_ij r_i r_j with r = deg^-1/2 and deg_i = sum_j A_ij
    dA = dA_hat * r[:, None] * r[None, :]
    t = dA_hat * A
    dr = t @ r + t.T @ r
    ddeg = dr * (-0.5) * deg ** -1.5
    dA = dA + ddeg[:, None]
    # A_ij and A_ji are the same function of the pair
    K = (dA + dA.T) * graph.sim * graph.keep
    x = graph.points
    if cfg.distance is Distance.SQUARED_EUCLIDEAN:
        coef = K / cfg.sigma ** 2
        dpoints = -(coef.sum(axis=1)[:, None] * x - coef @ x)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(graph.dist > 0, 1.0 / graph.dist, 0.0)
        coef = K * inv / (2.0 * cfg.sigma ** 2)
        dpoints = -(coef.sum(axis=1)[:, None] * x - coef @ x)
    if graph.norms is not None:
        return normalize_rows_backward(dpoints, x, graph.norms)
    return dpoints


@dataclass(frozen=True)
class GCNConfig:
    hidden: int = 64


def init_weights(rng, in_dim: int, cfg: GCNConfig = GCNConfig()) -> dict:
    return {"gcn.W0": nc.glorot(rng, in_dim, cfg.hidden), "gcn.W1": nc.glorot(rng, cfg.hidden, 1)}


def gcn_forward(x, graph: RelationGraph, params: dict):
    """y = A_hat ReLU(A_hat x W0) W1; returns (length-n predictions, cache)."""
    W0, W1 = params["gcn.W0"], params["gcn.W1"]
    if x.shape[0] != graph.n:
        raise ShapeMismatch(f"gcn: {x.shape[0]} rows vs graph of {graph.n}")
    if x.shape[1] != W0.shape[0]:
        raise ShapeMismatch(f"gcn: features {x.shape[1]} vs W0 {W0.shape}")
    P = graph.A_hat @ x
    H1 = nc.affine(P, W0)
    Z = nc.relu(H1)
    H2 = graph.A_hat @ Z
    y = nc.affine(H2, W1)[:, 0]
    return y, (x, P, H1, Z, H2)


def gcn_backward(dy, graph: RelationGraph, params: dict, cache):
    """Returns (dx, dA_hat, grads) for upstream gradient ``dy`` of shape (n,)."""
    x, P, H1, Z, H2 = cache
    W0, W1 = params["gcn.W0"], params["gcn.W1"]
    dy = dy[:, None]
    dH2, dW1, _ = nc.affine_backward(dy, H2, W1)
    dA_hat = dH2 @ Z.T
    dZ = graph.A_hat.T @ dH2
    dH1 = nc.relu_backward(dZ, H1)
    dP, dW0, _ = nc.affine_backward(dH1, P, W0)
    dA_hat += dP @ x.T
    dx = graph.A_hat.T @ dP
    return dx, dA_hat, {"gcn.W0": dW0, "gcn.W1": dW1}


def predict(x, graph, params):
    return gcn_forward(x, graph, params)[0]


def regression_loss(preds, labels, labeled_idx) -> float:
    """Mean squared error over the labeled rows only."""
    labeled_idx = np.asarray(labeled_idx, dtype=int)
    if labeled_idx.size == 0:
        raise EmptyLabeledError("regression loss needs at least one labeled row")
    diff = preds[labeled_idx] - np.asarray(labels, dtype=np.float64)
    return float(np.mean(diff * diff))


def regression_loss_backward(preds, labels, labeled_idx, scale=1.0):
    labeled_idx = np.asarray(labeled_idx, dtype=int)
    if labeled_idx.size == 0:
        raise EmptyLabeledError("regression loss needs at least one labeled row")
    g = np.zeros_like(preds)
    np.add.at(g, labeled_idx, 2.0 * scale * (preds[labeled_idx] - labels) / labeled_idx.size)
    return g


def dump_graph(graph: RelationGraph) -> str:
    """Edge list ``i j s_ij`` (i < j) followed by a degree summary."""
    lines = []
    iu = np.triu_indices(graph.n, k=1)
    for i, j in zip(*iu):
        if graph.A[i, j] > 0:
            lines.append(f"{i} {j} {graph.A[i, j]:.17g}")
    deg = graph.degrees
    lines.append(f"# nodes {graph.n} edges {len(lines)} degree min {deg.min():.6g} "
                 f"mean {deg.mean():.6g} max {deg.max():.6g}")
    return "\n".join(lines) + "\n"
