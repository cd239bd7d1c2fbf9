"""Dense float64 building blocks with hand-written backward passes.

Every forward function has a matching ``*_backward`` taking the upstream
gradient and whatever the forward needs.  Parameters are kept in plain
``dict[str, np.ndarray]`` so optimizers, gradient checks and checkpoints can
treat them uniformly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, NonDeterministicLoss, NonFiniteError, ShapeMismatch


def ensure_finite(*arrays, where="input"):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"non-finite value in {where}")


def affine(x, W, b=None):
    """out = x @ W + b, with b broadcast over rows."""
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[0]:
        raise ShapeMismatch(f"affine: x{x.shape} @ W{W.shape}")
    if b is not None and b.shape != (W.shape[1],):
        raise ShapeMismatch(f"affine: bias {b.shape} vs {W.shape[1]} outputs")
    ensure_finite(x, W, where="affine")
    out = x @ W
    if b is not None:
        out = out + b
    return out


def affine_backward(dout, x, W):
    """Returns (dx, dW, db)."""
    return dout @ W.T, x.T @ dout, dout.sum(axis=0)


def relu(x):
    ensure_finite(x, where="relu")
    return np.maximum(x, 0.0)


def relu_backward(dout, x):
    # subgradient at 0 is 0
    return dout * (x > 0)


def mse(a, b):
    """Mean over rows of the squared l2 row differences."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"mse: {a.shape} vs {b.shape}")
    ensure_finite(a, b, where="mse")
    diff = (a - b).reshape(len(a), -1)
    return float(np.sum(diff * diff) / len(a))


def mse_backward(a, b, scale=1.0):
    """Gradient of ``scale * mse(a, b)`` with respect to ``a``."""
    return (2.0 * scale / len(a)) * (a - b)


def glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class Adam:
    """Bias-corrected Adam; weight decay is fixed at zero."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        """Update ``params`` in place.  Names absent from ``grads`` are skipped."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            p = params[name]
            if g.shape != p.shape:
                raise ShapeMismatch(f"adam: grad {name} {g.shape} vs param {p.shape}")
            ensure_finite(g, where=f"gradient of {name}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class GradReport:
    max_rel_error: dict
    mean_rel_error: dict
    tol: float

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst < self.tol


def grad_check(loss_fn, params: dict, analytic: dict, eps=1e-5, tol=1e-4,
               max_coords=None, rng=None) -> GradReport:
    """Compare analytic gradients with central differences.

    ``loss_fn(params)`` must return a float; ``params`` is perturbed in place
    and restored.  Relative error is ``|a - n| / max(|a|, |n|, floor)`` with
    ``floor = max(1e-8, 1e-6 * |loss|)``: central differences carry roundoff
    of order ``1e-16 * |loss| / eps``, so gradients below the floor are
    compared absolutely.  With ``max_coords`` set,
    only that many randomly chosen coordinates per tensor are probed.
    """
    base = loss_fn(params)
    if loss_fn(params) != base:
        raise NonDeterministicLoss("two evaluations at identical parameters differ")
    rng = rng if rng is not None else np.random.default_rng(0)
    floor = max(1e-8, 1e-6 * abs(base))
    max_err, mean_err = {}, {}
    for name, p in params.items():
        flat = p.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        a = analytic[name].reshape(-1)
        errs = []
        for k in coords:
            old = flat[k]
            flat[k] = old + eps
            up = loss_fn(params)
            flat[k] = old - eps
            down = loss_fn(params)
            flat[k] = old
            num = (up - down) / (2 * eps)
            errs.append(abs(a[k] - num) / max(abs(a[k]), abs(num), floor))
        max_err[name] = float(max(errs, default=0.0))
        mean_err[name] = float(np.mean(errs)) if errs else 0.0
    return GradReport(max_err, mean_err, tol)


# Checkpoint layout (all integers little-endian):
#   magic b"ASCKPT01" | uint32 tensor count | per tensor:
#   uint16 name length | utf-8 name | uint8 ndim | uint32 dims... | float64 row-major data
_MAGIC = b"ASCKPT01"


def save_tensors(path, tensors: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_tensors(path) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != _MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    pos = 8

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise CheckpointError(f"{path}: truncated")
        out = struct.unpack_from(fmt, data, pos)
        pos += size
        return out

    (count,) = take("<I")
    tensors = {}
    for _ in range(count):
        (nlen,) = take("<H")
        name = data[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = take("<B")
        shape = take(f"<{ndim}I") if ndim else ()
        n = int(np.prod(shape)) if shape else 1
        if pos + 8 * n > len(data):
            raise CheckpointError(f"{path}: truncated payload for {name}")
        tensors[name] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
    if pos != len(data):
        raise CheckpointError(f"{path}: trailing bytes")
    return tensors
