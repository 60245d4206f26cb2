"""Residual self-attention over the time axis and the main convolutional block."""

import numpy as np

from app.errors import DimensionError
from app.nn.layers import Conv1d, Module
from app.tensor import Parameter, Tensor, ops

__all__ = ["QK_REDUCTION", "MainBlock", "SelfAttention1D"]

QK_REDUCTION = 8


class SelfAttention1D(Module):
    """
    Dot-product attention between time steps of a (batch, channels, length) map.

    Query and key project to max(1, channels // 8) channels; value and output
    keep the channel count. `gamma` is the learnable residual weight, starting
    at exactly zero; the owning block applies it.
    """

    def __init__(self, channels: int, rng: np.random.Generator, *, spectral: bool = True):
        super().__init__()
        reduced = max(1, channels // QK_REDUCTION)
        self.query = Conv1d(channels, reduced, 1, rng, spectral=spectral)
        self.key = Conv1d(channels, reduced, 1, rng, spectral=spectral)
        self.value = Conv1d(channels, channels, 1, rng, spectral=spectral)
        self.out = Conv1d(channels, channels, 1, rng, spectral=spectral)
        self.gamma = Parameter(np.zeros(()))

    def attention_map(self, x: Tensor) -> Tensor:
        """(batch, length, length); row i holds the weights query i puts on each key."""
        q = self.query(x)
        k = self.key(x)
        scores = ops.matmul(ops.transpose(q, (0, 2, 1)), k)
        return ops.softmax(scores, axis=-1)

    def forward(self, x: Tensor) -> Tensor:
        attention = self.attention_map(x)
        v = self.value(x)
        attended = ops.matmul(v, ops.transpose(attention, (0, 2, 1)))
        return self.out(attended)


class MainBlock(Module):
    """
    m∘f: y = LR(SN(conv_k3(x))), then gamma·SA(y) + y.

    The attention term is always evaluated so gamma receives a gradient while it
    is still zero. With self-attention disabled the block reduces to f.
    """

    def __init__(
        self,
        channels: int,
        rng: np.random.Generator,
        *,
        self_attention: bool = True,
        spectral: bool = True,
    ):
        super().__init__()
        self.channels = channels
        self.conv = Conv1d(channels, channels, 3, rng, padding=1, spectral=spectral)
        self.attention = (
            SelfAttention1D(channels, rng, spectral=spectral) if self_attention else None
        )

    def f(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[1] != self.channels:  # noqa: PLR2004
            msg = f"MainBlock expects {self.channels} channels, got input {x.shape}"
            raise DimensionError(msg)
        return ops.leaky_relu(self.conv(x))

    def forward(self, x: Tensor) -> Tensor:
        y = self.f(x)
        if self.attention is None:
            return y
        return self.attention.gamma * self.attention(y) + y
