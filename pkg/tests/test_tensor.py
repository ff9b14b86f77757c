"""Tests for the autodiff tensors."""
from __future__ import annotations

import numpy as np
import pytest

from pyanomaly import tensor as tn
from pyanomaly.enums import OpKind
from pyanomaly.exceptions import ContractError, DivergenceError, ShapeError
from pyanomaly.tensor import Tensor, backward

from . import GRADIENT_TOLERANCE, gradient_error


def test_softmax_uniform() -> None:
    """Test softmax of equal scores is uniform."""
    result = tn.softmax(Tensor([2.0, 2.0, 2.0])).numpy()

    assert np.allclose(result, 1 / 3)


def test_softmax_rows_are_simplex() -> None:
    """Test softmax rows are nonnegative and sum to one."""
    rng = np.random.default_rng(0)
    result = tn.softmax(Tensor(rng.normal(scale=5.0, size=(5, 7))), axis=-1).numpy()

    assert np.all(result >= 0)
    assert np.allclose(result.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_mse_of_identical_inputs() -> None:
    """Test mse(x, x) is zero."""
    x = Tensor(np.arange(6.0).reshape(2, 3))

    assert tn.mse(x, x).item() == 0.0


def test_matmul_identity() -> None:
    """Test multiplying by the identity."""
    a = np.random.default_rng(1).normal(size=(3, 4))

    assert np.array_equal(tn.matmul(Tensor(np.eye(3)), Tensor(a)).numpy(), a)


def test_arithmetic_with_constants() -> None:
    """Test operator overloads accept Python numbers."""
    x = Tensor([1.0, 2.0])

    assert np.array_equal((x * 2.0 + 1.0).numpy(), [3.0, 5.0])
    assert np.array_equal((1.0 - x).numpy(), [0.0, -1.0])
    assert np.array_equal((x / 2).numpy(), [0.5, 1.0])
    assert np.array_equal((-x).numpy(), [-1.0, -2.0])
    assert (x + x).op_kind == OpKind.ADD


def test_product_rule() -> None:
    """Test d(xy)/dx = y and d(xy)/dy = x."""
    x = Tensor(3.0)
    y = Tensor(-2.0)
    backward(x * y)

    assert x.grad == -2.0
    assert y.grad == 3.0


def test_tanh_gradient_at_zero() -> None:
    """Test tanh'(0) = 1."""
    x = Tensor(0.0)
    backward(tn.tanh(x))

    assert x.grad == 1.0


def test_backward_requires_scalar_root() -> None:
    """Test backward rejects non-scalar roots."""
    with pytest.raises(ContractError):
        backward(Tensor(np.ones(3)) * 2.0)


def test_shared_subexpressions_accumulate() -> None:
    """Test fan-out gradients equal those of the expanded graph."""
    x = Tensor(0.7)
    shared = tn.tanh(x)
    backward(shared * shared + shared)

    x_expanded = Tensor(0.7)
    backward(tn.tanh(x_expanded) * tn.tanh(x_expanded) + tn.tanh(x_expanded))

    t = np.tanh(0.7)
    assert float(x.grad) == pytest.approx(float(x_expanded.grad), rel=1e-12)
    assert float(x.grad) == pytest.approx((2 * t + 1) * (1 - t * t), rel=1e-12)


def test_backward_is_repeatable() -> None:
    """Test a second backward pass recomputes instead of accumulating."""
    x = Tensor([1.0, 2.0])
    root = tn.sum_(tn.square(x))

    backward(root)
    backward(root)

    assert np.array_equal(x.grad, [2.0, 4.0])


def test_slice_gradient() -> None:
    """Test slicing routes gradients back to the selected entries."""
    x = Tensor(np.arange(6.0).reshape(2, 3))
    backward(tn.sum_(x[:, 1]))

    assert np.array_equal(x.grad, [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])


def test_broadcast_gradient() -> None:
    """Test broadcast operands receive summed gradients."""
    x = Tensor(np.ones((4, 3)))
    bias = Tensor(np.zeros(3))
    backward(tn.sum_(x + bias))

    assert np.array_equal(bias.grad, [4.0, 4.0, 4.0])


def test_shape_errors_name_both_shapes() -> None:
    """Test mismatched operands raise ShapeError naming their shapes."""
    with pytest.raises(ShapeError, match=r"\(2, 3\) and \(4,\)"):
        Tensor(np.ones((2, 3))) + Tensor(np.ones(4))

    with pytest.raises(ShapeError):
        tn.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    with pytest.raises(ShapeError):
        tn.mse(Tensor(np.ones(2)), Tensor(np.ones(3)))

    with pytest.raises(ShapeError):
        tn.concat([Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3)))], axis=1)

    with pytest.raises(ShapeError):
        tn.reshape(Tensor(np.ones(6)), (4, 2))


def test_non_finite_values_raise() -> None:
    """Test an op producing a non-finite value raises DivergenceError."""
    with pytest.raises(DivergenceError):
        tn.log(Tensor(0.0))


def test_conv1d_identity_kernel() -> None:
    """Test the [0, 1, 0] kernel reproduces its input."""
    x = np.random.default_rng(2).normal(size=(6, 1))
    kernel = np.array([[[0.0], [1.0], [0.0]]])

    assert np.array_equal(tn.conv1d(Tensor(x), Tensor(kernel)).numpy(), x)


def test_conv1d_ones_on_constant() -> None:
    """Test a width-3 ones kernel on a constant sequence."""
    x = np.full((5, 1), 2.0)
    result = tn.conv1d(Tensor(x), Tensor(np.ones((1, 3, 1)))).numpy()[:, 0]

    assert np.array_equal(result[1:-1], [6.0, 6.0, 6.0])
    assert result[0] == result[-1] == 4.0


def test_conv1d_matches_nested_loops() -> None:
    """Test conv1d against a direct cross-correlation."""
    rng = np.random.default_rng(3)
    x = rng.normal(size=(7, 2))
    kernels = rng.normal(size=(3, 5, 2))

    padded = np.pad(x, ((2, 2), (0, 0)))
    expected = np.zeros((7, 3))
    for t in range(7):
        for f in range(3):
            for k in range(5):
                for d in range(2):
                    expected[t, f] += padded[t + k, d] * kernels[f, k, d]

    assert np.allclose(tn.conv1d(Tensor(x), Tensor(kernels)).numpy(), expected, rtol=1e-12, atol=1e-12)
    assert tn.conv1d(Tensor(x[np.newaxis]), Tensor(kernels)).shape == (1, 7, 3)


def test_conv1d_shape_errors() -> None:
    """Test conv1d rejects even kernels and empty sequences."""
    with pytest.raises(ShapeError):
        tn.conv1d(Tensor(np.ones((4, 1))), Tensor(np.ones((1, 2, 1))))

    with pytest.raises(ShapeError):
        tn.conv1d(Tensor(np.zeros((0, 1))), Tensor(np.ones((1, 7, 1))))

    with pytest.raises(ShapeError):
        tn.conv1d(Tensor(np.ones((4, 2))), Tensor(np.ones((1, 3, 1))))


@pytest.mark.parametrize("seed", range(3))
def test_elementwise_gradients(seed: int) -> None:
    """Test elementwise, reduction and reshaping ops against finite differences."""
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(3, 4)))
    y = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)))

    def loss() -> Tensor:
        mixed = tn.sigmoid(x) * tn.exp(tn.scale(x, 0.3)) + tn.log(y) - tn.tanh(y)
        reshaped = tn.transpose(tn.reshape(mixed, (4, 3)))
        return tn.mean(tn.square(reshaped)) + tn.sum_(tn.softmax(x, axis=0)[1])

    assert gradient_error(loss, {"x": x, "y": y}, seed=seed) < GRADIENT_TOLERANCE


@pytest.mark.parametrize("seed", range(3))
def test_structural_gradients(seed: int) -> None:
    """Test matmul, concat, stack and conv1d against finite differences."""
    rng = np.random.default_rng(seed)
    a = Tensor(rng.normal(size=(2, 5, 3)))
    b = Tensor(rng.normal(size=(3, 2)))
    kernels = Tensor(rng.normal(size=(2, 3, 3)))

    def loss() -> Tensor:
        product = tn.matmul(a, b)
        features = tn.conv1d(a, kernels)
        joined = tn.concat([product, features], axis=-1)
        stacked = tn.stack([joined, tn.tanh(joined)], axis=1)
        return tn.mean(tn.square(stacked))

    params = {"a": a, "b": b, "kernels": kernels}
    assert gradient_error(loss, params, seed=seed) < GRADIENT_TOLERANCE
