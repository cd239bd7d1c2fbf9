"""Kendall tau-b, MSE and Pearson r for predicted vs. true performance."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateInput, LengthMismatch


@dataclass(frozen=True)
class MetricsReport:
    n: int
    ktau: float
    mse: float
    pearson_r: float

    def to_dict(self) -> dict:
        return asdict(self)


def _pair(pred, truth, min_n):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {truth.size} targets")
    if pred.size < min_n:
        raise DegenerateInput(f"need at least {min_n} samples, got {pred.size}")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(truth))):
        raise DegenerateInput("non-finite values")
    return pred, truth


def _tau_b(num: int, untied_x: int, untied_y: int) -> float:
    if untied_x == 0 or untied_y == 0:
        raise DegenerateInput("kendall tau undefined for a constant vector")
    return num / math.sqrt(untied_x * untied_y)


def kendall_tau_counts_bruteforce(pred, truth):
    """Return (C - D, pairs untied in pred, pairs untied in truth) by enumeration."""
    pred, truth = _pair(pred, truth, 2)
    n = len(pred)
    num = untied_p = untied_t = 0
    for i in range(n):
        for j in range(i + 1, n):
            sp = int(pred[i] > pred[j]) - int(pred[i] < pred[j])
            st = int(truth[i] > truth[j]) - int(truth[i] < truth[j])
            num += sp * st
            untied_p += sp != 0
            untied_t += st != 0
    return num, untied_p, untied_t


def kendall_tau_bruteforce(pred, truth) -> float:
    """O(n^2) reference tau-b."""
    return _tau_b(*kendall_tau_counts_bruteforce(pred, truth))


def _tied_pairs(sorted_vals) -> int:
    total = 0
    run = 1
    for k in range(1, len(sorted_vals)):
        if sorted_vals[k] == sorted_vals[k - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    return total + run * (run - 1) // 2


def _count_swaps(a: list) -> int:
    """Number of strict inversions in ``a``, counted by bottom-up merge sort.

    ``a`` is used as scratch space and is left in an unspecified order.
    """
    n = len(a)
    swaps = 0
    buf = a[:]
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if a[j] < a[i]:
                    buf[k] = a[j]
                    swaps += mid - i
                    j += 1
                else:
                    buf[k] = a[i]
                    i += 1
                k += 1
            buf[k:hi] = a[i:mid] + a[j:hi]
        a, buf = buf, a
        width *= 2
    return swaps


def kendall_tau_counts(pred, truth):
    """O(n log n) counts (Knight's method); same integers as the brute force."""
    pred, truth = _pair(pred, truth, 2)
    n = len(pred)
    n0 = n * (n - 1) // 2
    order = np.lexsort((truth, pred))
    x = pred[order].tolist()
    y = truth[order].tolist()
    tie_x = _tied_pairs(x)
    tie_xy = 0
    run = 1
    for k in range(1, n):
        if x[k] == x[k - 1] and y[k] == y[k - 1]:
            run += 1
        else:
            tie_xy += run * (run - 1) // 2
            run = 1
    tie_xy += run * (run - 1) // 2
    swaps = _count_swaps(y)
    tie_y = _tied_pairs(sorted(y))
    num = n0 - tie_x - tie_y + tie_xy - 2 * swaps
    return num, n0 - tie_x, n0 - tie_y


def kendall_tau(pred, truth) -> float:
    """Tie-corrected Kendall tau-b in [-1, 1]."""
    return _tau_b(*kendall_tau_counts(pred, truth))


def mse_metric(pred, truth) -> float:
    pred, truth = _pair(pred, truth, 1)
    d = pred - truth
    return float(np.mean(d * d))


def pearson(pred, truth) -> float:
    pred, truth = _pair(pred, truth, 2)
    a = pred - pred.mean()
    b = truth - truth.mean()
    sa, sb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if sa == 0.0 or sb == 0.0:
        raise DegenerateInput("pearson r undefined for a constant vector")
    return max(-1.0, min(1.0, float(a @ b) / (sa * sb)))


def evaluate(pred, truth) -> MetricsReport:
    pred, truth = _pair(pred, truth, 2)
    return MetricsReport(len(pred), kendall_tau(pred, truth), mse_metric(pred, truth), pearson(pred, truth))
