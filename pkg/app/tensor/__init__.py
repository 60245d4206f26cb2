"""Reverse-mode automatic differentiation on NumPy arrays."""

from app.tensor import ops
from app.tensor.core import (
    ComputationTape,
    Parameter,
    Tensor,
    backward,
    default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
)
from app.tensor.random import make_rng

__all__ = [
    "ComputationTape",
    "Parameter",
    "Tensor",
    "backward",
    "default_dtype",
    "is_grad_enabled",
    "make_rng",
    "no_grad",
    "ops",
    "precision",
]
