"""Tests for the reverse-mode tape"""

import numpy as np
import pytest

from structured_light_sdf import autodiff as ad
from structured_light_sdf.autodiff import Tape, Var, grad_wrt_input
from structured_light_sdf.errors import DomainError, ShapeError
from tests.conftest import numerical_gradient

RNG = np.random.default_rng(42)
X = RNG.uniform(0.2, 1.5, size=(3, 4))


def check_unary(fn, x0=X, weights=None, atol=1e-6):
    """Compare the tape gradient of sum(w * fn(x)) with central differences"""
    out_shape = np.shape(fn(x0))
    weights = RNG.normal(size=out_shape) if weights is None else weights

    tape = Tape()
    x = tape.leaf(x0)
    loss = ad.sum_(ad.mul(fn(x), weights))
    grads = tape.backward(loss)

    expected = numerical_gradient(lambda v: np.sum(weights * fn(v)), x0)
    np.testing.assert_allclose(grads[x], expected, atol=atol, rtol=1e-5)


@pytest.mark.parametrize("op", [
    ad.exp, ad.log, ad.sin, ad.cos, ad.sigmoid, ad.sqrt, ad.square, ad.reciprocal, ad.neg,
    lambda v: ad.softplus(v, beta=100.0),
    lambda v: ad.softplus(v - 1.0, beta=3.0),
    lambda v: ad.abs_(v - 0.9),
    lambda v: ad.minimum(v, 0.8),
    lambda v: ad.maximum(v, 0.8),
    lambda v: ad.cumsum(v, axis=1),
    lambda v: ad.cumsum(v, axis=0),
    lambda v: ad.reshape(v, (4, 3)),
    lambda v: ad.sum_(v, axis=0),
    lambda v: ad.mean(v, axis=1, keepdims=True),
    lambda v: ad.mean(v),
], ids=["exp", "log", "sin", "cos", "sigmoid", "sqrt", "square", "reciprocal", "neg",
        "softplus-sharp", "softplus", "abs", "min", "max", "cumsum-1", "cumsum-0", "reshape",
        "sum-axis", "mean-keepdims", "mean"])
def test_unary_gradients(op):
    check_unary(op)


def test_binary_broadcasting():
    row = RNG.normal(size=(1, 4))
    check_unary(lambda v: v * row + v / (row ** 2 + 1.0) - 2.0 * v)
    check_unary(lambda v: ad.div(1.0, v))


def test_gradient_flows_to_broadcast_operand():
    tape = Tape()
    a = tape.leaf(X)
    b = tape.leaf(np.ones((1, 4)))
    grads = tape.backward(ad.sum_(ad.mul(a, b)))
    np.testing.assert_allclose(grads[b], X.sum(axis=0, keepdims=True))
    np.testing.assert_allclose(grads[a], np.ones_like(X))


def test_matmul():
    m = RNG.normal(size=(4, 2))
    check_unary(lambda v: v @ m)
    tape = Tape()
    weights = tape.leaf(m)
    grads = tape.backward(ad.sum_(ad.square(ad.matmul(X, weights))))
    expected = numerical_gradient(lambda v: np.sum((X @ v) ** 2), m)
    np.testing.assert_allclose(grads[weights], expected, atol=1e-6)


def test_fancy_getitem_accumulates_repeats():
    index = (np.array([0, 0, 2, 1]), np.array([1, 1, 3, 0]))
    check_unary(lambda v: v[index], weights=np.array([1.0, 2.0, 3.0, 4.0]))
    check_unary(lambda v: v[:, 1:3])
    check_unary(lambda v: v[..., None, 2])


def test_concat_and_where():
    other = RNG.normal(size=(3, 2))
    check_unary(lambda v: ad.concat([v, other, v[:, :1]], axis=1))
    mask = X > 0.8
    check_unary(lambda v: ad.where(mask, ad.square(v), ad.exp(v)))


def test_numpy_passthrough():
    result = ad.exp(ad.add(np.ones(3), 1.0))
    assert isinstance(result, np.ndarray)
    np.testing.assert_allclose(result, np.exp(2.0))


def test_reflected_operators_with_arrays():
    tape = Tape()
    x = tape.leaf(X)
    y = np.ones_like(X) - x
    assert isinstance(y, Var)
    grads = tape.backward(ad.sum_(y))
    np.testing.assert_allclose(grads[x], -np.ones_like(X))


def test_backward_needs_a_scalar():
    tape = Tape()
    x = tape.leaf(X)
    with pytest.raises(DomainError):
        tape.backward(ad.exp(x))


def test_shape_errors():
    tape = Tape()
    x = tape.leaf(X)
    with pytest.raises(ShapeError):
        ad.add(x, np.ones((2, 4)))
    with pytest.raises(ShapeError):
        ad.matmul(x, np.ones(4))
    with pytest.raises(ShapeError):
        ad.concat([x, np.ones((2, 2))], axis=1)


def test_operands_on_different_tapes():
    x = Tape().leaf(X)
    y = Tape().leaf(X)
    with pytest.raises(ShapeError):
        ad.add(x, y)


def test_unreachable_leaf_has_zero_gradient():
    tape = Tape()
    x = tape.leaf(X)
    unused = tape.leaf(np.ones(5))
    grads = tape.backward(ad.sum_(x))
    np.testing.assert_array_equal(grads[unused], np.zeros(5))


def test_grad_wrt_input_gives_per_point_gradients():
    points = RNG.normal(size=(5, 3))
    tape = Tape()
    x = tape.leaf(points)
    out = ad.sum_(ad.square(x), axis=-1)
    np.testing.assert_allclose(grad_wrt_input(tape, out, x), 2.0 * points)
    with pytest.raises(DomainError):
        grad_wrt_input(tape, out, ad.square(x))


def test_dump_lists_every_node():
    tape = Tape()
    x = tape.leaf(X, name="x")
    ad.sum_(ad.exp(x))
    listing = tape.dump().splitlines()
    assert len(listing) == len(tape) == 3
    assert "leaf" in listing[0] and listing[0].endswith("x")
    assert "in=[1]" in listing[2]
