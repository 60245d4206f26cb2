"""Dense tensors with reverse-mode automatic differentiation.

A `Tensor` wraps a NumPy array. Every differentiable operation creates a new
tensor that remembers its parents and a closure mapping the output adjoint to
the parent adjoints. `backward()` records the graph reachable from a scalar
loss into a `ComputationTape` (topological order) and replays it in reverse.
"""

import threading
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager

import numpy as np

from app.errors import ContractError, DimensionError

__all__ = [
    "ComputationTape",
    "Parameter",
    "Tensor",
    "backward",
    "default_dtype",
    "is_grad_enabled",
    "no_grad",
    "precision",
]

# Per-thread autograd state: tapes and tensors are confined to one worker.
_local = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


def default_dtype() -> type[np.floating]:
    return getattr(_local, "dtype", np.float32)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording in the current thread."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


@contextmanager
def precision(dtype: type[np.floating]) -> Iterator[None]:
    """
    Switch the storage dtype of newly created tensors in the current thread.

    Training and inference run in float32. Gradient checks switch to float64
    so central differences are not dominated by rounding.
    """
    previous = default_dtype()
    _local.dtype = dtype
    try:
        yield
    finally:
        _local.dtype = previous


class Tensor:
    """N-dimensional float array participating in reverse-mode autodiff."""

    __array_priority__ = 100.0

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        *,
        parents: tuple["Tensor", ...] = (),
        backward_fn: BackwardFn | None = None,
        op: str = "",
    ):
        self.data = np.asarray(data, dtype=default_dtype())
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self.backward_fn is None

    def item(self) -> float:
        if self.data.size != 1:
            msg = f"item() needs a single-element tensor, got shape {self.shape}"
            raise DimensionError(msg)
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        grad = np.asarray(grad, dtype=self.data.dtype).reshape(self.data.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Operator sugar delegates to app.tensor.ops (imported lazily to avoid a cycle).

    def __add__(self, other):
        from app.tensor import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from app.tensor import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from app.tensor import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from app.tensor import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from app.tensor import ops

        return ops.div(self, other)

    def __rtruediv__(self, other):
        from app.tensor import ops

        return ops.div(other, self)

    def __neg__(self):
        from app.tensor import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from app.tensor import ops

        return ops.matmul(self, other)


class Parameter(Tensor):
    """Trainable leaf tensor."""

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


def make_result(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: BackwardFn,
    op: str,
) -> Tensor:
    """Wrap an op result, attaching it to the graph only when a parent needs grads."""
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(
            data,
            requires_grad=True,
            parents=tuple(parents),
            backward_fn=backward_fn,
            op=op,
        )
    return Tensor(data)


class ComputationTape:
    """Executed operations reachable from a loss, in topological order."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def record(cls, loss: Tensor) -> "ComputationTape":
        # Iterative post-order DFS; deep generators would overflow recursion.
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(loss, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            stack.extend((p, False) for p in node.parents if id(p) not in visited)
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.nodes)

    def reversed(self) -> Iterator[Tensor]:
        return reversed(self.nodes)


def backward(loss: Tensor) -> None:
    """
    Populate `.grad` on every leaf reachable from `loss` that requires grads.

    Gradients accumulate across calls; callers zero them between steps.
    """
    if loss.data.size != 1:
        msg = f"backward() needs a scalar loss, got shape {loss.shape}"
        raise ContractError(msg)
    if not loss.requires_grad:
        return

    tape = ComputationTape.record(loss)
    adjoints: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}

    for node in tape.reversed():
        grad = adjoints.pop(id(node), None)
        if grad is None:
            continue
        if node.is_leaf:
            if node.requires_grad:
                node.accumulate_grad(grad)
            continue
        parent_grads = node.backward_fn(grad)
        for parent, parent_grad in zip(node.parents, parent_grads, strict=True):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in adjoints:
                adjoints[key] = adjoints[key] + parent_grad
            else:
                adjoints[key] = parent_grad
