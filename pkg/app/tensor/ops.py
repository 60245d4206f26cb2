"""Differentiable operations on `Tensor`.

Each op computes its forward result with NumPy and registers a closure that maps
the output adjoint to input adjoints. Reductions and matrix products accumulate
in float64 and cast back to the tensor dtype.
"""

from collections.abc import Sequence
from functools import lru_cache

import numpy as np

from app.errors import DimensionError
from app.tensor.core import Tensor, make_result

__all__ = [
    "LEAKY_SLOPE",
    "abs",
    "add",
    "avg_pool",
    "broadcast_to",
    "concat",
    "conv1d",
    "div",
    "exp",
    "leaky_relu",
    "log",
    "log_sigmoid",
    "matmul",
    "max",
    "mean",
    "mul",
    "neg",
    "reshape",
    "softmax",
    "sqrt",
    "sub",
    "sum",
    "take_rows",
    "tensor",
    "transpose",
    "upsample_linear",
]

LEAKY_SLOPE = 0.2

_ACC = np.float64


def tensor(value) -> Tensor:
    """Coerce scalars and arrays to constant tensors; tensors pass through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out dimensions that were broadcast to produce `grad`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return make_result(a.data / b.data, (a, b), backward, "div")


def neg(x) -> Tensor:
    x = tensor(x)
    return make_result(-x.data, (x,), lambda g: (-g,), "neg")


def exp(x) -> Tensor:
    x = tensor(x)
    out = np.exp(x.data)
    return make_result(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = tensor(x)
    return make_result(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def sqrt(x) -> Tensor:
    """Square root; the adjoint at exactly zero is taken as zero."""
    x = tensor(x)
    out = np.sqrt(np.maximum(x.data, 0.0))

    def backward(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, 0.5 * g / safe, 0.0),)

    return make_result(out, (x,), backward, "sqrt")


def abs(x) -> Tensor:
    """Absolute value; subgradient 0 at exactly zero."""
    x = tensor(x)
    return make_result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "abs")


def log_sigmoid(x) -> Tensor:
    """log(1 / (1 + exp(-x))) without overflow."""
    x = tensor(x)
    out = -np.logaddexp(0.0, -x.data)

    def backward(g):
        # d/dx log sigmoid(x) = sigmoid(-x)
        return (g * np.exp(-np.logaddexp(0.0, x.data)),)

    return make_result(out, (x,), backward, "log_sigmoid")


def leaky_relu(x, slope: float = LEAKY_SLOPE) -> Tensor:
    x = tensor(x)
    positive = x.data > 0
    out = np.where(positive, x.data, slope * x.data)
    return make_result(
        out, (x,), lambda g: (np.where(positive, g, slope * g),), "leaky_relu"
    )


# Reductions and shape manipulation


def _normalize_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(a % ndim for a in axes)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, dtype=_ACC, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return make_result(out, (x,), backward, "sum")


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    out = x.data.sum(axis=axes, dtype=_ACC, keepdims=keepdims) / count

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape),)

    return make_result(out, (x,), backward, "mean")


def max(x, axis: int = -1) -> Tensor:
    """Maximum along one axis; the adjoint goes to the first maximal entry."""
    x = tensor(x)
    axis = axis % x.ndim
    index = np.expand_dims(np.argmax(x.data, axis=axis), axis)
    out = np.take_along_axis(x.data, index, axis=axis).squeeze(axis)

    def backward(g):
        grad = np.zeros(x.shape, dtype=g.dtype)
        np.put_along_axis(grad, index, np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return make_result(out, (x,), backward, "max")


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = tensor(x)
    return make_result(
        x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape"
    )


def transpose(x, axes: Sequence[int]) -> Tensor:
    x = tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(
        x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),), "transpose"
    )


def broadcast_to(x, shape: Sequence[int]) -> Tensor:
    x = tensor(x)
    shape = tuple(shape)
    return make_result(
        np.broadcast_to(x.data, shape),
        (x,),
        lambda g: (_unbroadcast(g, x.shape),),
        "broadcast_to",
    )


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    parts = [tensor(t) for t in tensors]
    axis = axis % parts[0].ndim
    for part in parts[1:]:
        other = [s for i, s in enumerate(part.shape) if i != axis]
        first = [s for i, s in enumerate(parts[0].shape) if i != axis]
        if other != first:
            msg = f"concat: shapes {parts[0].shape} and {part.shape} differ off axis {axis}"
            raise DimensionError(msg)
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_result(
        np.concatenate([p.data for p in parts], axis=axis), parts, backward, "concat"
    )


def take_rows(table, indices: np.ndarray) -> Tensor:
    """Gather rows of a 2-D table; the adjoint scatters back to those rows only."""
    table = tensor(table)
    indices = np.asarray(indices, dtype=np.int64)
    rows = table.shape[0]
    if indices.size and (indices.min() < 0 or indices.max() >= rows):
        msg = f"row index out of range for table with {rows} rows: {indices.tolist()}"
        raise IndexError(msg)

    def backward(g):
        grad = np.zeros(table.shape, dtype=g.dtype)
        np.add.at(grad, indices, g)
        return (grad,)

    return make_result(table.data[indices], (table,), backward, "take_rows")


# Linear algebra


def matmul(a, b) -> Tensor:
    """
    Matrix product over the last two axes, batched over leading axes.

    Adjoints: dA = dC·Bᵀ and dB = Aᵀ·dC.
    """
    a, b = tensor(a), tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:  # noqa: PLR2004
        msg = f"matmul: cannot multiply shapes {a.shape} and {b.shape}"
        raise DimensionError(msg)
    out = np.matmul(a.data.astype(_ACC), b.data.astype(_ACC))

    def backward(g):
        g = g.astype(_ACC)
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2).astype(_ACC))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2).astype(_ACC), g)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return make_result(out, (a, b), backward, "matmul")


def softmax(x, axis: int = -1) -> Tensor:
    x = tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted.astype(_ACC))
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return make_result(out, (x,), backward, "softmax")


# Sequence operators


def conv1d(
    x,
    weight,
    bias=None,
    padding: int | tuple[int, int] = 0,
    dilation: int = 1,
) -> Tensor:
    """
    One-dimensional cross-correlation with stride 1.

    Args:
        x: (batch, c_in, length)
        weight: (c_out, c_in, kernel)
        bias: (c_out,) or None
        padding: symmetric zero padding, or (left, right)
        dilation: spacing between kernel taps

    Returns:
        (batch, c_out, length + left + right - dilation * (kernel - 1))
    """
    x, weight = tensor(x), tensor(weight)
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:  # noqa: PLR2004
        msg = f"conv1d: input {x.shape} incompatible with weight {weight.shape}"
        raise DimensionError(msg)
    left, right = (padding, padding) if isinstance(padding, int) else padding
    batch, c_in, length = x.shape
    c_out, _, kernel = weight.shape
    span = dilation * (kernel - 1) + 1
    padded_length = length + left + right
    if span > padded_length:
        msg = (
            f"conv1d: kernel span {span} exceeds padded input length {padded_length} "
            f"(input {x.shape}, weight {weight.shape})"
        )
        raise DimensionError(msg)
    out_length = padded_length - span + 1

    padded = np.pad(x.data, ((0, 0), (0, 0), (left, right)))
    # columns: (batch, c_in * kernel, out_length), row order (c_in, kernel)
    cols = np.stack(
        [padded[:, :, k * dilation : k * dilation + out_length] for k in range(kernel)],
        axis=2,
    ).reshape(batch, c_in * kernel, out_length)
    w2 = weight.data.reshape(c_out, c_in * kernel)
    out = np.matmul(w2.astype(_ACC), cols.astype(_ACC))
    parents = [x, weight]
    if bias is not None:
        bias = tensor(bias)
        out = out + bias.data.reshape(1, c_out, 1)
        parents.append(bias)

    def backward(g):
        g = g.astype(_ACC)
        grad_w = np.tensordot(g, cols.astype(_ACC), axes=([0, 2], [0, 2]))
        grad_cols = np.matmul(w2.T.astype(_ACC), g).reshape(
            batch, c_in, kernel, out_length
        )
        grad_padded = np.zeros((batch, c_in, padded_length), dtype=_ACC)
        for k in range(kernel):
            grad_padded[:, :, k * dilation : k * dilation + out_length] += grad_cols[
                :, :, k, :
            ]
        grads = [
            grad_padded[:, :, left : left + length],
            grad_w.reshape(weight.shape),
        ]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    return make_result(out, parents, backward, "conv1d")


def avg_pool(x, kernel: int = 2, stride: int | None = None) -> Tensor:
    """Average pooling over the last axis (the DOWN operator at kernel=stride=2)."""
    x = tensor(x)
    stride = stride or kernel
    length = x.shape[-1]
    if kernel > length or kernel < 1:
        msg = f"avg_pool: kernel {kernel} invalid for length {length}"
        raise DimensionError(msg)
    out_length = (length - kernel) // stride + 1
    stop = stride * (out_length - 1) + 1
    total = np.zeros((*x.shape[:-1], out_length), dtype=_ACC)
    for k in range(kernel):
        total += x.data[..., k : k + stop : stride]
    out = total / kernel

    def backward(g):
        grad = np.zeros(x.shape, dtype=_ACC)
        share = g / kernel
        for k in range(kernel):
            grad[..., k : k + stop : stride] += share
        return (grad,)

    return make_result(out, (x,), backward, "avg_pool")


@lru_cache(maxsize=64)
def _interpolation_matrix(length: int) -> np.ndarray:
    """(length, 2·length) matrix of the center-aligned linear upsampling map."""
    j = np.arange(2 * length, dtype=np.float64)
    source = np.clip((j + 0.5) / 2.0 - 0.5, 0.0, length - 1)
    lower = np.floor(source).astype(np.int64)
    upper = np.minimum(lower + 1, length - 1)
    frac = source - lower
    matrix = np.zeros((length, 2 * length), dtype=np.float64)
    matrix[lower, np.arange(2 * length)] += 1.0 - frac
    matrix[upper, np.arange(2 * length)] += frac
    matrix.setflags(write=False)
    return matrix


def upsample_linear(x) -> Tensor:
    """Double the last axis by center-aligned linear interpolation (the UP operator)."""
    x = tensor(x)
    matrix = _interpolation_matrix(x.shape[-1])
    out = np.matmul(x.data.astype(_ACC), matrix)
    return make_result(
        out, (x,), lambda g: (np.matmul(g.astype(_ACC), matrix.T),), "upsample_linear"
    )
