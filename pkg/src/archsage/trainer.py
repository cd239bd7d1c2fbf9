"""Joint training of auto-encoder and GCN assessor, baseline, and inference."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import archspace, assessor, embedder
from . import numcore as nc
from .archspace import SpaceParams
from .assessor import GCNConfig, GraphConfig
from .embedder import EmbedderConfig, PretrainConfig
from .errors import CheckpointError, EmptyLabeledError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.5
    batch_size: int = 256
    epochs: int = 200
    labeled_ratio: float = 0.25  # share of each batch drawn from the labeled set
    lr: float = 1e-3
    seed: int = 0
    pretrain_epochs: int = 50
    use_autoencoder: bool = True
    standardize_labels: bool = True
    anchor_cap: int = 512
    graph: GraphConfig = field(default_factory=GraphConfig)
    embed: EmbedderConfig = field(default_factory=EmbedderConfig)
    gcn: GCNConfig = field(default_factory=GCNConfig)

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if not 0.0 < self.labeled_ratio <= 1.0:
            raise ValueError("labeled_ratio must lie in (0, 1]")
        if self.epochs < 0 or self.pretrain_epochs < 0:
            raise ValueError("epoch counts must be >= 0")

    @property
    def labeled_per_batch(self) -> int:
        return max(1, int(round(self.batch_size * self.labeled_ratio)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["graph"]["distance"] = self.graph.distance.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        graph = GraphConfig(**d.pop("graph", {}))
        emb = d.pop("embed", {})
        emb = EmbedderConfig(**{**emb, "hidden": tuple(emb.get("hidden", (128, 64)))})
        gcn = GCNConfig(**d.pop("gcn", {}))
        return cls(graph=graph, embed=emb, gcn=gcn, **d)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    regression: float
    reconstruction: float


@dataclass
class TrainedAssessor:
    params: dict
    config: TrainConfig
    anchor_features: np.ndarray
    anchor_idx: np.ndarray
    space: SpaceParams = field(default_factory=SpaceParams)
    identity_graph: bool = False
    label_shift: float = 0.0
    label_scale: float = 1.0

    def embed(self, features):
        if self.config.use_autoencoder:
            return embedder.encode_batch(features, self.params)
        return features

    def predict_features(self, features) -> np.ndarray:
        """Predict each query row inside a graph built from the anchors plus that row."""
        features = np.asarray(features, dtype=np.float64)
        if len(features) == 0:
            return np.zeros(0)
        q_emb = self.embed(features)
        a_emb = self.embed(self.anchor_features)
        out = np.empty(len(features))
        cap = self.config.anchor_cap
        for k in range(len(features)):
            anchors = a_emb
            if len(a_emb) > cap:
                d = np.sum((self.anchor_features - features[k]) ** 2, axis=1)
                anchors = a_emb[np.sort(np.argsort(d, kind="stable")[:cap])]
            x = np.vstack([anchors, q_emb[k:k + 1]])
            if self.identity_graph:
                graph = assessor.identity_graph(len(x))
            else:
                graph = assessor.build_graph(x, self.config.graph)
            out[k] = assessor.predict(x, graph, self.params)[-1]
        return out * self.label_scale + self.label_shift

    def predict(self, specs) -> np.ndarray:
        return self.predict_features(archspace.encode_batch(list(specs), self.space))

    __call__ = predict

    def save(self, path) -> None:
        """Write ``path`` (tensor file) and ``path + '.json'`` (sidecar)."""
        tensors = dict(self.params)
        tensors["anchor.features"] = self.anchor_features
        nc.save_tensors(path, tensors)
        sidecar = {
            "config": self.config.to_dict(),
            "space": asdict(self.space),
            "identity_graph": self.identity_graph,
            "label_shift": self.label_shift,
            "label_scale": self.label_scale,
            "anchor_idx": [int(i) for i in self.anchor_idx],
            "feature_dim": int(self.anchor_features.shape[1]),
            "embed_dim": int(self.config.embed.embed_dim),
        }
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TrainedAssessor":
        tensors = nc.load_tensors(path)
        try:
            with open(str(path) + ".json", encoding="utf-8") as fh:
                sidecar = json.load(fh)
        except FileNotFoundError:
            raise CheckpointError(f"missing sidecar {path}.json") from None
        anchors = tensors.pop("anchor.features")
        sp = sidecar["space"]
        space = SpaceParams(sp["max_nodes"], sp["max_edges"], tuple(sp["op_vocabulary"]))
        return cls(tensors, TrainConfig.from_dict(sidecar["config"]), anchors,
                   np.asarray(sidecar["anchor_idx"], dtype=int), space, sidecar["identity_graph"],
                   sidecar["label_shift"], sidecar["label_scale"])


def init_params(cfg: TrainConfig, feature_dim: int) -> dict:
    rng = np.random.default_rng(cfg.seed)
    params = {}
    gcn_in = feature_dim
    if cfg.use_autoencoder:
        params.update(embedder.init_weights(rng, replace(cfg.embed, input_dim=feature_dim)))
        gcn_in = cfg.embed.embed_dim
    params.update(assessor.init_weights(rng, gcn_in, cfg.gcn))
    return params


def loss_and_grads(params, features, labeled_mask, labels, cfg: TrainConfig, identity_graph=False):
    """Combined loss (1 - lam) L_rg + lam L_rc over one batch, with gradients.

    ``labels`` holds one target per labeled row, in row order.
    """
    lam = cfg.lam
    labeled_idx = np.flatnonzero(labeled_mask)
    if labeled_idx.size == 0:
        raise EmptyLabeledError("batch has no labeled rows")
    if cfg.use_autoencoder:
        emb, enc_cache = embedder.encode_forward(features, params)
    else:
        emb = features
    graph = assessor.identity_graph(len(emb)) if identity_graph else assessor.build_graph(emb, cfg.graph)
    preds, gcn_cache = assessor.gcn_forward(emb, graph, params)
    l_rg = assessor.regression_loss(preds, labels, labeled_idx)
    dpreds = assessor.regression_loss_backward(preds, labels, labeled_idx, scale=1.0 - lam)
    demb, dA_hat, grads = assessor.gcn_backward(dpreds, graph, params, gcn_cache)
    if not identity_graph:
        demb = demb + assessor.build_graph_backward(dA_hat, graph, cfg.graph)
    l_rc = 0.0
    if cfg.use_autoencoder:
        recon, dec_cache = embedder._mlp_forward(emb, params, "dec")
        l_rc, drecon = embedder.reconstruction_terms(recon, features, labeled_mask)
        demb_dec, dec_grads = embedder._mlp_backward(lam * drecon, params, "dec", dec_cache)
        grads.update(dec_grads)
        _, enc_grads = embedder.encode_backward(demb + demb_dec, params, enc_cache)
        grads.update(enc_grads)
    total = (1.0 - lam) * l_rg + lam * l_rc
    return LossBreakdown(total, l_rg, l_rc), grads


def _batches(rng, labeled_idx, unlabeled_idx, cfg: TrainConfig):
    """One epoch of index batches; every batch holds at least one labeled row."""
    if len(unlabeled_idx) == 0:
        order = rng.permutation(labeled_idx)
        for start in range(0, len(order), cfg.batch_size):
            yield order[start:start + cfg.batch_size]
        return
    n_lab = min(cfg.labeled_per_batch, len(labeled_idx))
    n_unl = max(1, cfg.batch_size - n_lab)
    order = rng.permutation(unlabeled_idx)
    for start in range(0, len(order), n_unl):
        lab = rng.choice(labeled_idx, size=n_lab, replace=False)
        yield np.concatenate([lab, order[start:start + n_unl]])


def _fit(ds, cfg: TrainConfig, identity_graph: bool, on_epoch=None):
    labeled_idx = ds.labeled_idx
    if labeled_idx.size == 0:
        raise EmptyLabeledError("dataset has no labeled architectures")
    unlabeled_idx = ds.unlabeled_idx
    feats, labels, mask = ds.features, ds.labels, ds.labeled_mask
    shift, scale = 0.0, 1.0
    if cfg.standardize_labels:
        known = labels[labeled_idx]
        shift = float(known.mean())
        scale = float(known.std()) if known.std() > 0 else 1.0
        labels = (labels - shift) / scale
    params = init_params(cfg, feats.shape[1])
    if cfg.use_autoencoder and cfg.pretrain_epochs > 0:
        pcfg = PretrainConfig(cfg.pretrain_epochs, cfg.batch_size, cfg.lr, cfg.seed)
        params, _ = embedder.pretrain_weights(feats, mask, pcfg, params)
    rng = np.random.default_rng(cfg.seed + 1)
    opt = nc.Adam(lr=cfg.lr)
    history = []
    for epoch in range(cfg.epochs):
        parts = []
        for idx in _batches(rng, labeled_idx, unlabeled_idx, cfg):
            bmask = mask[idx]
            parts.append(loss_and_grads(params, feats[idx], bmask, labels[idx][bmask], cfg, identity_graph))
            breakdown, grads = parts[-1]
            if not np.isfinite(breakdown.total):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            opt.step(params, grads)
        row = LossBreakdown(*(float(np.mean([getattr(p[0], k) for p in parts]))
                              for k in ("total", "regression", "reconstruction")))
        history.append(row)
        if on_epoch is not None:
            on_epoch(epoch, row)
    model = TrainedAssessor(params, cfg, feats[labeled_idx].copy(), labeled_idx.copy(), ds.space, identity_graph,
                            shift, scale)
    return model, history


def train(ds, cfg: TrainConfig = TrainConfig(), on_epoch=None):
    """Pretrain the auto-encoder, then run mini-batch joint training.

    Returns (model, per-epoch LossBreakdown list).
    """
    return _fit(ds, cfg, identity_graph=False, on_epoch=on_epoch)


def train_supervised_baseline(ds, cfg: TrainConfig = TrainConfig(), on_epoch=None):
    """Supervised-only variant: labeled rows only, lam = 0, identity graph."""
    return _fit(ds.labeled_only(), replace(cfg, lam=0.0), identity_graph=True, on_epoch=on_epoch)


def predict(model: TrainedAssessor, queries) -> np.ndarray:
    return model.predict(queries)


def write_history(history, path, lam) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "L", "L_rg", "L_rc", "w_rg", "w_rc"])
        for k, h in enumerate(history):
            w.writerow([k, repr(h.total), repr(h.regression), repr(h.reconstruction), repr(1.0 - lam), repr(lam)])
