import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from archsage import metrics
from archsage.errors import DegenerateInput, LengthMismatch

vectors = st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.integers(-4, 4), min_size=n, max_size=n),
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=n, max_size=n)))


def mp_pearson(x, y):
    """Direct textbook formula at 50 digits."""
    mpmath.mp.dps = 50
    x = [mpmath.mpf(float(v)) for v in x]
    y = [mpmath.mpf(float(v)) for v in y]
    mx, my = sum(x) / len(x), sum(y) / len(y)
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return float(cov / mpmath.sqrt(sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y)))


def mp_mse(x, y):
    mpmath.mp.dps = 50
    return float(sum((mpmath.mpf(float(a)) - mpmath.mpf(float(b))) ** 2 for a, b in zip(x, y)) / len(x))


def test_kendall_examples():
    assert metrics.kendall_tau([0.1, 0.5, 0.9], [0.1, 0.5, 0.9]) == 1.0
    assert metrics.kendall_tau([3, 2, 1], [1, 2, 3]) == -1.0
    assert metrics.kendall_tau([1, 3, 2], [1, 2, 3]) == pytest.approx(1 / 3, abs=1e-15)


def test_kendall_hand_counts_with_ties():
    # pairs: (0,1) tied in pred, (0,2) C, (1,2) C, (0,3) D... enumerated by hand below
    pred, truth = [1, 1, 2, 0], [1, 2, 3, 4]
    # (0,1): pred tie; (0,2): C; (0,3): D; (1,2): C; (1,3): D; (2,3): D -> C-D = -1
    num, up, ut = metrics.kendall_tau_counts(pred, truth)
    assert (num, up, ut) == (-1, 5, 6)
    assert metrics.kendall_tau(pred, truth) == pytest.approx(-1 / math.sqrt(30), abs=1e-15)


def test_kendall_errors():
    with pytest.raises(LengthMismatch):
        metrics.kendall_tau([1, 2, 3], [1, 2])
    with pytest.raises(DegenerateInput):
        metrics.kendall_tau([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateInput):
        metrics.kendall_tau([1], [1])


def test_fast_kendall_equals_bruteforce_exactly():
    rng = np.random.default_rng(0)
    for k in range(1000):
        n = int(rng.integers(2, 201))
        if k % 3 == 0:
            x, y = rng.integers(0, 5, n), rng.integers(0, 5, n)
        elif k % 3 == 1:
            x, y = rng.normal(size=n), rng.integers(0, 3, n)
        else:
            x, y = rng.normal(size=n), rng.normal(size=n)
        assert metrics.kendall_tau_counts(x, y) == metrics.kendall_tau_counts_bruteforce(x, y)


@given(vectors)
def test_fast_kendall_property(xy):
    x, y = xy
    assert metrics.kendall_tau_counts(x, y) == metrics.kendall_tau_counts_bruteforce(x, y)


@given(vectors)
def test_kendall_agrees_with_scipy(xy):
    x, y = xy
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    assert metrics.kendall_tau(x, y) == pytest.approx(stats.kendalltau(x, y).statistic, abs=1e-12)


@given(vectors)
def test_kendall_symmetric_and_monotone_invariant(xy):
    x, y = xy
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    t = metrics.kendall_tau(x, y)
    assert -1 <= t <= 1
    assert metrics.kendall_tau(y, x) == t
    assert metrics.kendall_tau(np.exp(np.asarray(x, float)), y) == t


def test_mse_examples():
    assert metrics.mse_metric([0.3, 0.4], [0.3, 0.4]) == 0.0
    assert metrics.mse_metric([1, 0], [0, 0]) == 0.5
    with pytest.raises(LengthMismatch):
        metrics.mse_metric([1], [1, 2])


def test_pearson_examples():
    t = np.array([0.1, 0.4, 0.35, 0.9])
    assert metrics.pearson(2 * t + 3, t) == pytest.approx(1.0, abs=1e-15)
    assert metrics.pearson(-t, t) == pytest.approx(-1.0, abs=1e-15)
    assert metrics.pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(mp_pearson([1, 2, 3], [1, 2, 4]), abs=1e-12)
    # closed form: cov 3, var 2 and 14/3 -> 3 / sqrt(28/3)
    assert metrics.pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(3 / math.sqrt(28 / 3), abs=1e-15)
    with pytest.raises(DegenerateInput):
        metrics.pearson([2, 2], [1, 3])


def test_pearson_and_mse_match_high_precision():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 60))
        x, y = rng.uniform(0.7, 1.0, n), rng.uniform(0.7, 1.0, n)
        assert abs(metrics.pearson(x, y) - mp_pearson(x, y)) <= 1e-12
        assert abs(metrics.mse_metric(x, y) - mp_mse(x, y)) <= 1e-12


@given(vectors, st.floats(-5, 5))
def test_mse_translation_invariant_and_symmetric(xy, c):
    x, y = (np.asarray(v, float) for v in xy)
    assert metrics.mse_metric(x, y) == metrics.mse_metric(y, x)
    assert metrics.mse_metric(x + c, y + c) == pytest.approx(metrics.mse_metric(x, y), rel=1e-9, abs=1e-9)


@given(vectors, st.floats(0.1, 10), st.floats(-10, 10))
def test_pearson_affine_invariant(xy, a, b):
    x, y = (np.asarray(v, float) for v in xy)
    if np.ptp(x) == 0 or np.ptp(y) < 1e-6:
        return
    r = metrics.pearson(x, y)
    assert -1 <= r <= 1
    assert metrics.pearson(y, x) == pytest.approx(r, abs=1e-12)
    assert metrics.pearson(a * x + b, y) == pytest.approx(r, abs=1e-9)


def test_report():
    rep = metrics.evaluate([0.1, 0.3, 0.2], [0.1, 0.2, 0.3])
    assert rep.to_dict() == {"n": 3, "ktau": rep.ktau, "mse": rep.mse, "pearson_r": rep.pearson_r}
    assert rep.n == 3 and rep.ktau == pytest.approx(1 / 3)
