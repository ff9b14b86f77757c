"""Reverse-mode automatic differentiation over dense float64 tensors.

Every forward op evaluates eagerly and returns a new ``Tensor`` that records
its parents, its op kind and a closure mapping the output gradient to one
gradient per parent. ``backward`` sweeps the graph in reverse topological
order and accumulates gradients across fan-out.
"""
from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from typing import Any, Union

import numpy as np

from .enums import OpKind
from .exceptions import ContractError, DivergenceError, ShapeError

_LOGGER = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Union[np.ndarray, None]]]
Operand = Union["Tensor", float, int, np.ndarray]


class Tensor:
    """A node of the computation graph holding a float64 value."""

    __slots__ = ("data", "grad", "parents", "op_kind", "_backward", "name")
    __array_priority__ = 100

    def __init__(
        self,
        data: Any,
        parents: tuple[Tensor, ...] = (),
        op_kind: OpKind = OpKind.LEAF,
        backward: BackwardFn | None = None,
        name: str | None = None,
    ) -> None:
        """Wrap data as a float64 array."""
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.parents = parents
        self.op_kind = op_kind
        self._backward = backward
        self.name = name

    def __repr__(self) -> str:
        """Return a short description of the node."""
        label = f" {self.name}" if self.name else ""
        return f"Tensor({self.op_kind.value}{label}, shape={self.shape})"

    @property
    def shape(self) -> tuple[int, ...]:
        """Return the shape of the value."""
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        """Return the number of dimensions."""
        return int(self.data.ndim)

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a copy of the value."""
        return self.data.copy()

    def backward(self) -> dict[Tensor, np.ndarray]:
        """Backpropagate from this scalar node."""
        return backward(self)

    def __add__(self, other: Operand) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Operand) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Operand) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: Operand) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Operand) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Operand) -> Tensor:
        return mul(other, self)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __truediv__(self, other: float) -> Tensor:
        return scale(self, 1.0 / float(other))

    def __getitem__(self, index: Any) -> Tensor:
        return slice_(self, index)


def as_tensor(value: Operand) -> Tensor:
    """Return value as a graph node, wrapping constants as leaves."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _node(
    value: np.ndarray,
    parents: tuple[Tensor, ...],
    op_kind: OpKind,
    backward_fn: BackwardFn,
) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise DivergenceError(f"Non-finite value produced by {op_kind.value}")
    return Tensor(value, parents, op_kind, backward_fn)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad over the axes that broadcasting expanded to reach shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError as exc:
        raise ShapeError(
            f"Cannot {op} shapes {a.shape} and {b.shape}",  # noqa: EM102
        ) from exc


def add(a: Operand, b: Operand) -> Tensor:
    """Return a + b with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def _backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _node(a.data + b.data, (a, b), OpKind.ADD, _backward)


def sub(a: Operand, b: Operand) -> Tensor:
    """Return a - b with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "subtract")

    def _backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)

    return _node(a.data - b.data, (a, b), OpKind.SUB, _backward)


def mul(a: Operand, b: Operand) -> Tensor:
    """Return the elementwise product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "multiply")

    def _backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(grad * b.data, a.shape),
            _unbroadcast(grad * a.data, b.shape),
        )

    return _node(a.data * b.data, (a, b), OpKind.MUL, _backward)


def neg(a: Operand) -> Tensor:
    """Return -a."""
    a = as_tensor(a)
    return _node(-a.data, (a,), OpKind.NEG, lambda grad: (-grad,))


def scale(a: Operand, factor: float) -> Tensor:
    """Return a multiplied by a constant."""
    a = as_tensor(a)
    return _node(a.data * factor, (a,), OpKind.SCALE, lambda grad: (grad * factor,))


def matmul(a: Operand, b: Operand) -> Tensor:
    """Return the (batched) matrix product a @ b."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"Cannot matmul shapes {a.shape} and {b.shape}")  # noqa: EM102
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as exc:
        raise ShapeError(
            f"Cannot matmul shapes {a.shape} and {b.shape}",  # noqa: EM102
        ) from exc

    def _backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = grad @ np.swapaxes(b.data, -1, -2)
        grad_b = np.swapaxes(a.data, -1, -2) @ grad
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return _node(a.data @ b.data, (a, b), OpKind.MATMUL, _backward)


def tanh(a: Operand) -> Tensor:
    """Return the elementwise hyperbolic tangent."""
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _node(out, (a,), OpKind.TANH, lambda grad: (grad * (1.0 - out * out),))


def sigmoid(a: Operand) -> Tensor:
    """Return the elementwise logistic function."""
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _node(out, (a,), OpKind.SIGMOID, lambda grad: (grad * out * (1.0 - out),))


def exp(a: Operand) -> Tensor:
    """Return the elementwise exponential."""
    a = as_tensor(a)
    out = np.exp(a.data)
    return _node(out, (a,), OpKind.EXP, lambda grad: (grad * out,))


def log(a: Operand) -> Tensor:
    """Return the elementwise natural logarithm."""
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _node(out, (a,), OpKind.LOG, lambda grad: (grad / a.data,))


def square(a: Operand) -> Tensor:
    """Return the elementwise square."""
    a = as_tensor(a)
    return _node(a.data * a.data, (a,), OpKind.SQUARE, lambda grad: (2.0 * grad * a.data,))


def concat(tensors: Sequence[Operand], axis: int = -1) -> Tensor:
    """Return tensors joined along axis."""
    parts = tuple(as_tensor(t) for t in tensors)
    if not parts:
        raise ShapeError("Cannot concat an empty sequence")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        shapes = ", ".join(str(p.shape) for p in parts)
        raise ShapeError(
            f"Cannot concat shapes {shapes} along axis {axis}",  # noqa: EM102
        ) from exc

    splits = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def _backward(grad: np.ndarray) -> list[np.ndarray]:
        return np.split(grad, splits, axis=axis)

    return _node(out, parts, OpKind.CONCAT, _backward)


def stack(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    """Return tensors stacked along a new axis."""
    parts = [as_tensor(t) for t in tensors]
    expanded = []
    for part in parts:
        position = axis if axis >= 0 else part.ndim + axis + 1
        shape = (*part.shape[:position], 1, *part.shape[position:])
        expanded.append(reshape(part, shape))
    return concat(expanded, axis=axis)


def slice_(a: Operand, index: Any) -> Tensor:
    """Return a[index]."""
    a = as_tensor(a)
    out = np.array(a.data[index], dtype=np.float64)

    def _backward(grad: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(a.data)
        np.add.at(full, index, grad)
        return (full,)

    return _node(out, (a,), OpKind.SLICE, _backward)


def reshape(a: Operand, shape: Sequence[int]) -> Tensor:
    """Return a with a new shape."""
    a = as_tensor(a)
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(
            f"Cannot reshape {a.shape} to {tuple(shape)}",  # noqa: EM102
        ) from exc
    return _node(out, (a,), OpKind.RESHAPE, lambda grad: (grad.reshape(a.shape),))


def transpose(a: Operand, axes: Sequence[int] | None = None) -> Tensor:
    """Return a with permuted axes."""
    a = as_tensor(a)
    order = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(order))
    out = np.transpose(a.data, order)
    return _node(out, (a,), OpKind.TRANSPOSE, lambda grad: (np.transpose(grad, inverse),))


def sum_(a: Operand, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: FBT001, FBT002
    """Return the sum over axis (all elements when axis is None)."""
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def _backward(grad: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, a.shape).copy(),)

    return _node(np.asarray(out), (a,), OpKind.SUM, _backward)


def mean(a: Operand, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: FBT001, FBT002
    """Return the mean over axis (all elements when axis is None)."""
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def _backward(grad: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad / count, a.shape).copy(),)

    return _node(np.asarray(out), (a,), OpKind.MEAN, _backward)


def mse(a: Operand, b: Operand) -> Tensor:
    """Return the mean squared difference of two equally shaped tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"Cannot compare shapes {a.shape} and {b.shape}")  # noqa: EM102

    diff = a.data - b.data
    count = max(diff.size, 1)

    def _backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = grad * 2.0 * diff / count
        return grad_a, -grad_a

    return _node(np.asarray(np.mean(diff * diff)), (a, b), OpKind.MSE, _backward)


def softmax(a: Operand, axis: int = -1) -> Tensor:
    """Return the softmax of a along axis."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    weights = np.exp(shifted)
    out = weights / weights.sum(axis=axis, keepdims=True)

    def _backward(grad: np.ndarray) -> tuple[np.ndarray]:
        inner = (grad * out).sum(axis=axis, keepdims=True)
        return (out * (grad - inner),)

    return _node(out, (a,), OpKind.SOFTMAX, _backward)


def conv1d(x: Operand, kernels: Operand) -> Tensor:
    """Return the same-padded stride-1 cross-correlation of x along time.

    x is [T, D] or [B, T, D]; kernels is [F, k, D] with odd width k. The
    output carries one channel per kernel: [T, F] or [B, T, F].
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    if kernels.ndim != 3:
        raise ShapeError(f"Kernels must be [F, k, D], got {kernels.shape}")  # noqa: EM102

    n_filters, width, depth = kernels.shape
    if width % 2 == 0:
        raise ShapeError(f"Kernel width must be odd, got {width}")  # noqa: EM102

    batched = x.ndim == 3
    data = x.data if batched else x.data[np.newaxis]
    if data.ndim != 3 or data.shape[2] != depth:
        raise ShapeError(
            f"Cannot convolve input {x.shape} with kernels {kernels.shape}",  # noqa: EM102
        )

    steps = data.shape[1]
    pad = (width - 1) // 2
    if steps + 2 * pad < width:
        raise ShapeError(
            f"Kernel width {width} exceeds padded sequence {x.shape}",  # noqa: EM102
        )

    padded = np.pad(data, ((0, 0), (pad, pad), (0, 0)))
    # [B, T, D, k] -> [B, T, k, D]
    cols = np.lib.stride_tricks.sliding_window_view(padded, width, axis=1)
    cols = np.ascontiguousarray(np.swapaxes(cols, 2, 3))
    out = np.einsum("btkd,fkd->btf", cols, kernels.data)

    def _backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_b = grad if batched else grad[np.newaxis]
        grad_kernels = np.einsum("btkd,btf->fkd", cols, grad_b)
        grad_cols = np.einsum("btf,fkd->btkd", grad_b, kernels.data)
        grad_padded = np.zeros_like(padded)
        for offset in range(width):
            grad_padded[:, offset : offset + steps, :] += grad_cols[:, :, offset, :]
        grad_x = grad_padded[:, pad : pad + steps, :]
        return (grad_x if batched else grad_x[0]), grad_kernels

    result = out if batched else out[0]
    _LOGGER.debug("conv1d %s * %s -> %s", x.shape, kernels.shape, result.shape)
    return _node(result, (x, kernels), OpKind.CONV1D, _backward)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]

    while stack:
        node, finished = stack.pop()
        if finished:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        stack.extend((parent, False) for parent in node.parents if id(parent) not in visited)

    return order


def backward(root: Tensor) -> dict[Tensor, np.ndarray]:
    """Populate .grad of every ancestor of a scalar root with d(root)/d(node).

    Gradients are recomputed from zero on every call.
    """
    if root.data.size != 1:
        raise ContractError(
            f"backward requires a scalar root, got shape {root.shape}",  # noqa: EM102
        )

    order = _topological_order(root)
    for node in order:
        node.grad = np.zeros_like(node.data)
    root.grad = np.ones_like(root.data)

    for node in reversed(order):
        if node._backward is None:  # noqa: SLF001
            continue
        parent_grads = node._backward(node.grad)  # noqa: SLF001
        for parent, parent_grad in zip(node.parents, parent_grads):
            if parent_grad is not None:
                parent.grad += parent_grad  # type: ignore[operator]

    return {node: node.grad for node in order}  # type: ignore[misc]
