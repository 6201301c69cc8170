import numpy as np
import pytest

from src.numerics.grad_check import analytic_gradients, grad_check
from src.numerics.tensor import Tensor, concat, dropout, layer_norm, no_grad, softmax, stack, tensor
from src.pdw.errors import NonFiniteError, ShapeError


def _t(rng, *shape, lo=-1.0, hi=1.0):
    return tensor(rng.uniform(lo, hi, size=shape), requires_grad=True, dtype=np.float64)


def test_softmax_symmetric_and_stable(f64):
    assert softmax(tensor([0.0, 0.0])).data.tolist() == [0.5, 0.5]
    x = tensor(np.random.default_rng(0).normal(0, 1e3, size=(6, 9)))
    y = softmax(x, axis=-1).data
    assert np.all(np.isfinite(y))
    assert np.allclose(y.sum(axis=-1), 1.0, atol=1e-12, rtol=0)


def test_layer_norm_standardizes(f64):
    x = tensor(np.random.default_rng(1).normal(3, 5, size=(4, 16)))
    y = layer_norm(x).data
    assert np.allclose(y.mean(axis=-1), 0.0, atol=1e-10)
    assert np.allclose(y.var(axis=-1), 1.0, atol=1e-4)


def test_dropout_identities():
    x = tensor(np.ones((3, 4)))
    assert dropout(x, 0.0, train=True) is x
    assert dropout(x, 0.9, train=False) is x
    y = dropout(x, 0.5, train=True, rng=np.random.default_rng(0)).data
    assert set(np.unique(y).tolist()) <= {0.0, 2.0}


def test_quadratic_gradient(f64):
    x = tensor([1.0, 2.0, 3.0], requires_grad=True)
    (g,) = analytic_gradients(lambda a: (a * a).sum(), [x])
    assert g.tolist() == [2.0, 4.0, 6.0]
    assert grad_check(lambda a: (a * a).sum(), [x]) < 1e-8


def test_constant_function_has_zero_gradient(f64):
    x = tensor([1.0, -2.0], requires_grad=True)
    (g,) = analytic_gradients(lambda a: tensor(3.0), [x])
    assert g.tolist() == [0.0, 0.0]
    assert grad_check(lambda a: (a * 0.0).sum() + 1.0, [x]) == 0.0


def test_grad_check_rejects_non_scalar(f64):
    x = tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError):
        grad_check(lambda a: a * 2.0, [x])


UNARY = {
    "exp": lambda a: a.exp(),
    "log": lambda a: (a * a + 0.5).log(),
    "sqrt": lambda a: (a * a + 0.1).sqrt(),
    "sigmoid": lambda a: a.sigmoid(),
    "tanh": lambda a: a.tanh(),
    "pow": lambda a: (a * a + 1.0) ** -0.5,
    "neg": lambda a: -a,
    "relu": lambda a: (a + 0.05 * np.sign(a.data)).relu(),
}


@pytest.mark.parametrize("name", sorted(UNARY))
@pytest.mark.parametrize("seed", range(20))
def test_unary_ops_grad(f64, name, seed):
    rng = np.random.default_rng(seed)
    x = _t(rng, int(rng.integers(1, 4)), int(rng.integers(1, 5)))
    w = tensor(rng.normal(size=x.shape))
    assert grad_check(lambda a: (UNARY[name](a) * w).sum(), [x]) < 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_broadcast_binary_ops_grad(f64, seed):
    rng = np.random.default_rng(100 + seed)
    n, d = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    a, b, c = _t(rng, n, d), _t(rng, 1, d), _t(rng, n, 1, lo=0.5, hi=2.0)

    def f(a, b, c):
        return ((a + b) * c - b / c + 2.0 - a * 3.0).sum()

    assert grad_check(f, [a, b, c]) < 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_matmul_and_reductions_grad(f64, seed):
    rng = np.random.default_rng(200 + seed)
    h, n, k, m = (int(v) for v in rng.integers(1, 4, size=4))
    a, b = _t(rng, h, n, k), _t(rng, k, m)

    def f(a, b):
        y = a @ b
        return y.mean(axis=-1).sum() + (y * y).sum(axis=(0, 1)).mean() + y.max(axis=1).sum()

    assert grad_check(f, [a, b]) < 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_shape_ops_grad(f64, seed):
    rng = np.random.default_rng(300 + seed)
    a, b = _t(rng, 2, 3, 4), _t(rng, 2, 1, 4)
    v = tensor(rng.normal(size=(8, 2)))

    def f(a, b):
        x = concat([a, b], axis=1)
        y = x.transpose(2, 1, 0)
        z = stack([y[:, 0, :], y[:, -1, :]], axis=0).reshape(2, 8)
        return (z.swapaxes(0, 1) * v).sum() + x[1, 1:3].sum()

    assert grad_check(f, [a, b]) < 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_softmax_and_layer_norm_grad(f64, seed):
    rng = np.random.default_rng(400 + seed)
    x = _t(rng, 3, 6, lo=-3, hi=3)
    gamma, beta = _t(rng, 6), _t(rng, 6)
    w = tensor(rng.normal(size=(3, 6)))
    assert grad_check(lambda x: (softmax(x, axis=-1) * w).sum(), [x]) < 1e-5
    assert grad_check(lambda x, g, b: (layer_norm(x, g, b) * w).sum(), [x, gamma, beta]) < 1e-5


def test_shape_mismatch_names_both_shapes():
    a, b = tensor(np.ones((2, 3))), tensor(np.ones((4, 5)))
    with pytest.raises(ShapeError) as exc:
        a @ b
    assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)
    with pytest.raises(ShapeError):
        a + tensor(np.ones((3, 2)))


def test_sqrt_at_zero_has_finite_gradient(f64):
    x = tensor([0.0, 4.0], requires_grad=True)
    y = x.sqrt().sum()
    y.backward()
    assert np.all(np.isfinite(x.grad))
    assert x.grad[1] == pytest.approx(0.25)


def test_no_grad_records_nothing():
    x = tensor([1.0], requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad


def test_deep_tape_backward(f64):
    x = tensor([1.0], requires_grad=True)
    y = x
    for _ in range(5000):
        y = y * 1.0 + 0.0
    y.sum().backward()
    assert x.grad.tolist() == [1.0]


def test_gradients_accumulate_over_reuse(f64):
    x = tensor([3.0], requires_grad=True)
    (x * x + x).sum().backward()
    assert x.grad.tolist() == [7.0]


def test_debug_mode_flags_non_finite(monkeypatch):
    from config.settings import settings

    monkeypatch.setattr(settings, "debug", True)
    with pytest.raises(NonFiniteError):
        tensor([-1.0]).log()


def test_default_dtype_is_32_bit():
    assert Tensor([1.0]).dtype == np.float32
