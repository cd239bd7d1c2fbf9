"""MLP auto-encoder over hand-crafted cell features.

Encoder and decoder weights live in one flat dict under ``enc.*`` and
``dec.*`` so they can be checkpointed and stepped by a single optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .errors import ShapeMismatch


@dataclass(frozen=True)
class EmbedderConfig:
    input_dim: int = 56
    hidden: tuple = (128, 64)
    embed_dim: int = 32


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 50
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0


def _dims(cfg: EmbedderConfig):
    return [cfg.input_dim, *cfg.hidden, cfg.embed_dim]


def init_weights(rng: np.random.Generator, cfg: EmbedderConfig) -> dict:
    dims = _dims(cfg)
    params = {}
    for k, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        params[f"enc.{k}.W"] = nc.glorot(rng, a, b)
        params[f"enc.{k}.b"] = np.zeros(b)
    rdims = dims[::-1]
    for k, (a, b) in enumerate(zip(rdims[:-1], rdims[1:])):
        params[f"dec.{k}.W"] = nc.glorot(rng, a, b)
        params[f"dec.{k}.b"] = np.zeros(b)
    return params


def _n_layers(params, prefix):
    return sum(1 for name in params if name.startswith(prefix + ".") and name.endswith(".W"))


def _mlp_forward(x, params, prefix):
    """affine -> ReLU -> ... -> affine; the last layer is linear."""
    n = _n_layers(params, prefix)
    cache = []
    h = x
    for k in range(n):
        W, b = params[f"{prefix}.{k}.W"], params[f"{prefix}.{k}.b"]
        z = nc.affine(h, W, b)
        cache.append((h, z))
        h = nc.relu(z) if k < n - 1 else z
    return h, cache


def _mlp_backward(dout, params, prefix, cache):
    grads = {}
    n = len(cache)
    d = dout
    for k in reversed(range(n)):
        h, z = cache[k]
        if k < n - 1:
            d = nc.relu_backward(d, z)
        d, grads[f"{prefix}.{k}.W"], grads[f"{prefix}.{k}.b"] = nc.affine_backward(d, h, params[f"{prefix}.{k}.W"])
    return d, grads


def encode_batch(features, params):
    """n x F features -> n x embed_dim embedding."""
    return _mlp_forward(features, params, "enc")[0]


def decode_batch(emb, params):
    """n x embed_dim embedding -> n x F reconstruction."""
    return _mlp_forward(emb, params, "dec")[0]


def encode_forward(features, params):
    return _mlp_forward(features, params, "enc")


def encode_backward(demb, params, cache):
    """Returns (d features, encoder grads)."""
    return _mlp_backward(demb, params, "enc", cache)


def reconstruction_terms(recon, features, labeled_mask):
    """Per-side mean squared reconstruction error and its gradient.

    The labeled and unlabeled means are added, not pooled; an empty side
    contributes nothing.
    """
    if recon.shape != features.shape:
        raise ShapeMismatch(f"reconstruction {recon.shape} vs input {features.shape}")
    resid = recon - features
    sq = np.sum(resid * resid, axis=1)
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    n_l = int(labeled_mask.sum())
    n_u = len(labeled_mask) - n_l
    weights = np.where(labeled_mask, 1.0 / max(n_l, 1), 1.0 / max(n_u, 1))
    loss = float(np.sum(sq * weights))
    return loss, 2.0 * resid * weights[:, None]


def reconstruction_loss(feat_l, feat_u, params) -> float:
    feats = np.vstack([feat_l, feat_u])
    if len(feats) == 0:
        raise ValueError("reconstruction loss needs at least one architecture")
    mask = np.r_[np.ones(len(feat_l), bool), np.zeros(len(feat_u), bool)]
    recon = decode_batch(encode_batch(feats, params), params)
    return reconstruction_terms(recon, feats, mask)[0]


def autoencoder_loss_and_grads(features, labeled_mask, params, scale=1.0):
    """Reconstruction loss over a batch plus grads of ``scale * loss``."""
    emb, enc_cache = encode_forward(features, params)
    recon, dec_cache = _mlp_forward(emb, params, "dec")
    loss, drecon = reconstruction_terms(recon, features, labeled_mask)
    demb, grads = _mlp_backward(scale * drecon, params, "dec", dec_cache)
    _, enc_grads = encode_backward(demb, params, enc_cache)
    grads.update(enc_grads)
    return loss, grads, emb, enc_cache, demb


def pretrain_weights(features, labeled_mask, cfg: PretrainConfig, params: dict) -> tuple[dict, list]:
    """Minimize the reconstruction loss alone with Adam.

    Works on a copy of ``params``; returns (weights, per-epoch mean loss).
    """
    params = {k: v.copy() for k, v in params.items()}
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    n = len(features)
    if n == 0:
        raise ValueError("cannot pretrain on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    opt = nc.Adam(lr=cfg.lr)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads, *_ = autoencoder_loss_and_grads(features[idx], labeled_mask[idx], params)
            opt.step(params, grads)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return params, history


def pretrain(ds, cfg: PretrainConfig = PretrainConfig(), embed_cfg: EmbedderConfig | None = None,
             params: dict | None = None) -> dict:
    """Pretrain a fresh (or given) auto-encoder on every architecture in ``ds``."""
    if embed_cfg is None:
        embed_cfg = EmbedderConfig(input_dim=ds.features.shape[1])
    if params is None:
        params = init_weights(np.random.default_rng(cfg.seed), embed_cfg)
    return pretrain_weights(ds.features, ds.labeled_mask, cfg, params)[0]
