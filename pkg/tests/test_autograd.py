"""Gradient checks for the differentiable ops against central differences."""

import numpy as np
import pytest

from app.errors import ContractError, DimensionError
from app.tensor import ComputationTape, Parameter, Tensor, backward, no_grad, ops, precision

EPS = 1e-6
TOLERANCE = 1e-5


def gradcheck(fn, *arrays: np.ndarray) -> None:
    """Compare backward() with central differences for every input entry."""
    with precision(np.float64):
        params = [Parameter(np.array(a, dtype=np.float64)) for a in arrays]
        backward(fn(*params))
        for param in params:
            analytic = param.grad if param.grad is not None else np.zeros_like(param.data)
            numeric = np.zeros_like(param.data)
            for idx in np.ndindex(param.data.shape):
                original = param.data[idx]
                param.data[idx] = original + EPS
                with no_grad():
                    up = fn(*params).item()
                param.data[idx] = original - EPS
                with no_grad():
                    down = fn(*params).item()
                param.data[idx] = original
                numeric[idx] = (up - down) / (2 * EPS)
            np.testing.assert_allclose(analytic, numeric, rtol=TOLERANCE, atol=TOLERANCE)


def weighted(x: Tensor, seed: int = 0) -> Tensor:
    """Scalar with a non-uniform adjoint for every entry of `x`."""
    weights = np.random.default_rng(seed).normal(size=x.shape)
    return ops.sum(x * weights)


def test_broadcast_arithmetic_gradients(rng):
    """add/mul/div/sub reduce adjoints back to broadcast shapes."""
    gradcheck(
        lambda x, y, z: weighted((x * y - y) / z + x),
        rng.normal(size=(3, 4)),
        rng.normal(size=(4,)),
        rng.uniform(1.0, 2.0, size=(3, 1)),
    )


def test_matmul_gradients(rng):
    """Batched matmul against a shared right operand."""
    gradcheck(
        lambda x, w: weighted(ops.matmul(x, w)),
        rng.normal(size=(2, 3, 4)),
        rng.normal(size=(4, 5)),
    )


def test_conv1d_gradients(rng):
    """Input, weight and bias adjoints with symmetric padding."""
    gradcheck(
        lambda x, w, b: weighted(ops.conv1d(x, w, b, padding=1)),
        rng.normal(size=(2, 3, 7)),
        rng.normal(size=(4, 3, 3)),
        rng.normal(size=(4,)),
    )


def test_dilated_causal_conv1d_gradients(rng):
    """Left-only padding with dilation 2."""
    gradcheck(
        lambda x, w: weighted(ops.conv1d(x, w, padding=(4, 0), dilation=2)),
        rng.normal(size=(2, 2, 9)),
        rng.normal(size=(3, 2, 3)),
    )


def test_pool_and_upsample_gradients(rng):
    """avg_pool and upsample_linear are linear maps with exact adjoints."""
    gradcheck(lambda x: weighted(ops.upsample_linear(ops.avg_pool(x))), rng.normal(size=(2, 3, 8)))


def test_softmax_and_log_sigmoid_gradients(rng):
    """Row softmax and the stable log-sigmoid."""
    gradcheck(lambda x: weighted(ops.softmax(x, axis=-1)), rng.normal(size=(3, 5)))
    gradcheck(lambda x: ops.sum(ops.log_sigmoid(x)), rng.normal(scale=5.0, size=(7,)))


def test_reduction_gradients(rng):
    """mean, max, sqrt and abs away from their kinks."""
    gradcheck(lambda x: weighted(ops.max(x, axis=-1)), rng.normal(size=(3, 6)))
    gradcheck(lambda x: ops.sqrt(ops.mean(x * x)) + ops.mean(ops.abs(x), axis=None), rng.normal(size=(4, 3)))


def test_shape_op_gradients(rng):
    """reshape, transpose, concat, broadcast_to and take_rows."""
    gradcheck(
        lambda x, y: weighted(
            ops.concat([ops.transpose(ops.reshape(x, (3, 2, 2)), (0, 2, 1)), ops.broadcast_to(y, (3, 2, 2))], axis=2)
        ),
        rng.normal(size=(12,)),
        rng.normal(size=(1, 2, 2)),
    )
    gradcheck(lambda t: weighted(ops.take_rows(t, np.array([0, 2, 2]))), rng.normal(size=(4, 3)))


def test_shared_node_accumulates(rng):
    """A tensor used twice receives the sum of both adjoints."""
    gradcheck(lambda x: weighted(x * x + ops.exp(x)), rng.normal(size=(5,)))


def test_tape_is_topological():
    """Every node appears after all of its parents."""
    a = Parameter(np.ones(3))
    b = a * 2.0
    loss = ops.sum(b + a)
    tape = ComputationTape.record(loss)
    position = {id(node): i for i, node in enumerate(tape)}

    for node in tape:
        for parent in node.parents:
            assert position[id(parent)] < position[id(node)]
    assert tape.nodes[-1] is loss


def test_no_grad_records_nothing():
    """Results computed under no_grad are detached leaves."""
    a = Parameter(np.ones(3))
    with no_grad():
        out = ops.sum(a * 3.0)

    assert not out.requires_grad
    assert out.is_leaf


def test_backward_needs_scalar():
    """Non-scalar losses are rejected."""
    with pytest.raises(ContractError):
        backward(Parameter(np.ones(3)) * 2.0)


def test_item_needs_single_element():
    """Reading a vector as a number is a shape error."""
    assert Tensor([2.5]).item() == pytest.approx(2.5)
    with pytest.raises(DimensionError):
        Tensor(np.ones(3)).item()


def test_shape_mismatch_raises():
    """Incompatible operands raise DimensionError."""
    with pytest.raises(DimensionError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(DimensionError):
        ops.conv1d(Tensor(np.ones((1, 2, 4))), Tensor(np.ones((1, 3, 3))))


def test_default_precision_is_float32():
    """Tensors store float32 unless a precision block says otherwise."""
    assert Tensor([1.0]).data.dtype == np.float32
    with precision(np.float64):
        assert Tensor([1.0]).data.dtype == np.float64
