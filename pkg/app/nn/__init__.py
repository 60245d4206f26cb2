"""Neural building blocks on top of the tensor core."""

from app.nn.attention import MainBlock, SelfAttention1D
from app.nn.layers import (
    Conv1d,
    IndexEmbedding,
    Linear,
    Module,
    SpectralNorm,
    spectral_normalize,
)

__all__ = [
    "Conv1d",
    "IndexEmbedding",
    "Linear",
    "MainBlock",
    "Module",
    "SelfAttention1D",
    "SpectralNorm",
    "spectral_normalize",
]
