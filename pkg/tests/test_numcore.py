import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from archsage import numcore as nc
from archsage.errors import CheckpointError, NonDeterministicLoss, NonFiniteError, ShapeMismatch


def fd(f, x, eps=1e-5):
    """Independent central-difference gradient of scalar f at x."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def rel(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8))


def test_affine_identity():
    x = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(nc.affine(x, np.eye(3), np.zeros(3)), x)


def test_affine_hand_example():
    out = nc.affine(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]), np.array([5.0]))
    np.testing.assert_array_equal(out, [[16.0]])


def test_affine_backward_matches_differences(rng):
    x, W, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2)), rng.normal(size=2)
    up = rng.normal(size=(4, 2))
    loss = lambda: float(np.sum(nc.affine(x, W, b) * up))  # noqa: E731
    dx, dW, db = nc.affine_backward(up, x, W)
    assert rel(dx, fd(loss, x)) < 1e-6
    assert rel(dW, fd(loss, W)) < 1e-6
    assert rel(db, fd(loss, b)) < 1e-6


def test_affine_shape_errors():
    with pytest.raises(ShapeMismatch):
        nc.affine(np.ones((2, 3)), np.ones((2, 2)))
    with pytest.raises(ShapeMismatch):
        nc.affine(np.ones((2, 3)), np.ones((3, 2)), np.ones(3))


def test_relu_definition():
    np.testing.assert_array_equal(nc.relu(np.array([[-1.0, 0.0, 2.0]])), [[0.0, 0.0, 2.0]])


def test_relu_dead_region():
    x = -np.abs(np.random.default_rng(0).normal(size=(3, 4))) - 0.1
    assert not nc.relu(x).any()
    assert not nc.relu_backward(np.ones_like(x), x).any()


def test_relu_subgradient_at_zero_is_zero():
    assert nc.relu_backward(np.ones((1, 1)), np.zeros((1, 1)))[0, 0] == 0.0


def test_relu_gradient_away_from_zero(rng):
    x = rng.normal(size=(5, 4))
    x[np.abs(x) < 0.05] = 0.5
    up = rng.normal(size=x.shape)
    g = nc.relu_backward(up, x)
    assert rel(g, fd(lambda: float(np.sum(nc.relu(x) * up)), x)) < 1e-6


def test_mse_examples():
    a = np.array([[0.3, -1.0]])
    assert nc.mse(a, a.copy()) == 0.0
    assert nc.mse(np.array([1.0]), np.array([0.0])) == 1.0
    assert nc.mse(np.array([[1.0, 2.0]]), np.array([[0.0, 0.0]])) == 5.0


def test_mse_backward(rng):
    a, b = rng.normal(size=(6, 1)), rng.normal(size=(6, 1))
    assert rel(nc.mse_backward(a, b), fd(lambda: nc.mse(a, b), a)) < 1e-6


def test_ops_reject_non_finite():
    bad = np.array([[np.nan, 1.0]])
    with pytest.raises(NonFiniteError):
        nc.relu(bad)
    with pytest.raises(NonFiniteError):
        nc.affine(bad, np.ones((2, 1)))
    with pytest.raises(NonFiniteError):
        nc.mse(np.array([np.inf]), np.array([0.0]))


def test_glorot_bounds(rng):
    W = nc.glorot(rng, 30, 10)
    lim = np.sqrt(6 / 40)
    assert W.shape == (30, 10) and np.abs(W).max() <= lim


def test_adam_zero_gradient_is_fixed_point():
    p = {"w": np.array([1.0, -2.0])}
    opt = nc.Adam()
    opt.step(p, {"w": np.zeros(2)})
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])
    assert not opt.m["w"].any() and not opt.v["w"].any()


def test_adam_first_step_hand_value():
    p = {"w": np.array([0.5])}
    nc.Adam(lr=1e-3).step(p, {"w": np.array([1.0])})
    # m_hat = v_hat = 1 after bias correction, so the step is lr / (1 + eps)
    assert p["w"][0] == pytest.approx(0.5 - 1e-3 / (1 + 1e-8), abs=1e-15)


def test_adam_matches_textbook_loop(rng):
    grads = rng.normal(size=(20, 3))
    p = {"w": np.zeros(3)}
    opt = nc.Adam(lr=0.01)
    for g in grads:
        opt.step(p, {"w": g.copy()})
    w, m, v = np.zeros(3), np.zeros(3), np.zeros(3)
    for t, g in enumerate(grads, start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w = w - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p["w"], w, rtol=1e-12, atol=1e-15)


def test_adam_symmetric_params(rng):
    p = {"a": np.array([0.2]), "b": np.array([0.2])}
    opt = nc.Adam()
    for _ in range(5):
        g = rng.normal(size=1)
        opt.step(p, {"a": g.copy(), "b": g.copy()})
    assert p["a"][0] == p["b"][0]


@given(arrays(np.float64, 4, elements=st.floats(-10, 10)), arrays(np.float64, 4, elements=st.floats(-10, 10)))
def test_adam_zero_lr_is_identity(w, g):
    p = {"w": w.copy()}
    nc.Adam(lr=0.0).step(p, {"w": g})
    np.testing.assert_array_equal(p["w"], w)


def test_adam_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        nc.Adam().step({"w": np.zeros(2)}, {"w": np.zeros(3)})


def test_grad_check_quadratic(rng):
    p = {"p": rng.normal(size=(3, 2))}
    rep = nc.grad_check(lambda q: 0.5 * float(np.sum(q["p"] ** 2)), p, {"p": p["p"].copy()})
    assert rep.passed and rep.worst < 1e-8


def test_grad_check_flags_wrong_gradient(rng):
    p = {"p": rng.normal(size=5)}
    rep = nc.grad_check(lambda q: 0.5 * float(np.sum(q["p"] ** 2)), p, {"p": 2 * p["p"]})
    assert not rep.passed


def test_grad_check_restores_params(rng):
    w = rng.normal(size=4)
    p = {"w": w.copy()}
    nc.grad_check(lambda q: float(np.sum(np.sin(q["w"]))), p, {"w": np.cos(w)})
    np.testing.assert_array_equal(p["w"], w)


def test_grad_check_detects_nondeterminism():
    calls = iter(range(100))
    with pytest.raises(NonDeterministicLoss):
        nc.grad_check(lambda q: float(next(calls)), {"w": np.zeros(1)}, {"w": np.zeros(1)})


def test_checkpoint_round_trip(tmp_path, rng):
    tensors = {"b": rng.normal(size=3), "a.W": rng.normal(size=(2, 5)), "s": np.array(2.5)}
    path = tmp_path / "w.bin"
    nc.save_tensors(path, tensors)
    back = nc.load_tensors(path)
    assert sorted(back) == sorted(tensors)
    for k in tensors:
        assert back[k].shape == np.shape(tensors[k])
        np.testing.assert_array_equal(back[k], tensors[k])


def test_checkpoint_layout(tmp_path):
    path = tmp_path / "w.bin"
    nc.save_tensors(path, {"x": np.array([[1.0, 2.0]])})
    raw = path.read_bytes()
    assert raw[:8] == b"ASCKPT01"
    assert raw[8:12] == (1).to_bytes(4, "little")
    assert raw[12:14] == (1).to_bytes(2, "little") and raw[14:15] == b"x"
    assert raw[15] == 2
    assert np.frombuffer(raw[-16:], "<f8").tolist() == [1.0, 2.0]


def test_checkpoint_corruption(tmp_path):
    path = tmp_path / "w.bin"
    nc.save_tensors(path, {"x": np.ones(4)})
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(CheckpointError):
        nc.load_tensors(path)
    path.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(CheckpointError):
        nc.load_tensors(path)
