"""Adam with bias correction over named parameters."""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from app.errors import NumericError
from app.tensor import Parameter

__all__ = ["Adam", "AdamState", "adam_step"]

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moments per parameter name and the shared step counter."""

    step: int = 0
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)
    eps: float = 1e-8


def adam_step(
    params: dict[str, Parameter],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
) -> None:
    """
    One Adam update from each parameter's `.grad`; gradients are zeroed after.

    Parameters without a gradient are left untouched. A NaN gradient aborts
    the whole step before anything is modified.
    """
    for name, param in params.items():
        if param.grad is not None and not np.all(np.isfinite(param.grad)):
            msg = f"non-finite gradient for parameter {name!r} at step {state.step + 1}"
            raise NumericError(msg)

    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step

    for name, param in params.items():
        if param.grad is None:
            continue
        grad = param.grad.astype(np.float64)
        if name not in state.first:
            state.first[name] = np.zeros_like(grad)
            state.second[name] = np.zeros_like(grad)
        m = state.first[name]
        v = state.second[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * (grad * grad)
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        param.data = (param.data - update).astype(param.data.dtype)
        param.zero_grad()


class Adam:
    """Optimizer bound to a growing set of named parameters."""

    def __init__(
        self,
        params: Iterable[tuple[str, Parameter]],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
    ):
        self.lr = lr
        self.betas = betas
        self.params: dict[str, Parameter] = {}
        self.state = AdamState()
        self.add_params(params)

    def add_params(self, params: Iterable[tuple[str, Parameter]]) -> None:
        """Register parameters created after construction (e.g. a new stage)."""
        added = 0
        for name, param in params:
            if name not in self.params:
                self.params[name] = param
                added += 1
        if added:
            logger.debug(f"Optimizer now tracks {len(self.params)} tensors (+{added})")

    def step(self) -> None:
        adam_step(self.params, self.state, self.lr, self.betas)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()
