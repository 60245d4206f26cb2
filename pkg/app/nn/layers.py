"""Parameterised layers: the module container, convolutions, linear maps, embeddings."""

import logging
from collections.abc import Iterator

import numpy as np

from app.errors import ContractError, DimensionError
from app.tensor import Parameter, Tensor, is_grad_enabled, ops

__all__ = [
    "SN_EPSILON",
    "Conv1d",
    "IndexEmbedding",
    "Linear",
    "Module",
    "SpectralNorm",
    "spectral_normalize",
]

logger = logging.getLogger(__name__)

SN_EPSILON = 1e-12


class Module:
    """
    Container that discovers parameters and buffers from its attributes.

    Attributes holding a `Parameter`, a `Module` or a list of modules are walked
    in assignment order, so parameter names are stable across runs, e.g.
    ``blocks.1.conv.weight``.
    """

    def __init__(self):
        self._buffers: dict[str, np.ndarray] = {}

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value

    def _children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, value in self._buffers.items():
            yield prefix + name, value
        for name, child in self._children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def freeze(self) -> None:
        """Stop gradient tracking on every parameter."""
        for p in self.parameters():
            p.requires_grad = False

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """Copy arrays into existing parameters and buffers; every entry must match."""
        own = self.state_dict()
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            msg = f"state mismatch: missing={missing} unexpected={unexpected}"
            raise ContractError(msg)
        for name, p in self.named_parameters():
            p.data = _checked(name, state[name], p.data)
        for module_prefix, module in self._modules_with_buffers():
            for name in module._buffers:
                key = module_prefix + name
                module._buffers[name] = _checked(key, state[key], module._buffers[name])

    def _modules_with_buffers(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self._children():
            yield from child._modules_with_buffers(f"{prefix}{name}.")


def _checked(name: str, value: np.ndarray, current: np.ndarray) -> np.ndarray:
    value = np.asarray(value)
    if value.shape != current.shape:
        msg = f"{name}: stored shape {value.shape} != expected {current.shape}"
        raise DimensionError(msg)
    return value.astype(current.dtype, copy=True)


def _uniform_fan_in(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _normalize(vector: np.ndarray) -> np.ndarray:
    return vector / max(float(np.linalg.norm(vector)), SN_EPSILON)


class SpectralNorm:
    """Persistent power-iteration state for one weight tensor."""

    def __init__(self, module: Module, rows: int, rng: np.random.Generator):
        self.module = module
        module.register_buffer(
            "sn_u", _normalize(rng.standard_normal(rows)).astype(np.float32)
        )

    @property
    def u(self) -> np.ndarray:
        return self.module._buffers["sn_u"]

    @u.setter
    def u(self, value: np.ndarray) -> None:
        self.module._buffers["sn_u"] = value


def spectral_normalize(
    weight: Tensor, state: SpectralNorm, iterations: int = 1
) -> Tensor:
    """
    Divide `weight` by its largest singular value estimated with power iteration.

    The weight is viewed as (out_features, everything else). u and v are treated
    as constants in the backward pass; sigma = uᵀWv stays differentiable in W.
    The persistent u advances only while gradients are recorded, so inference is
    repeatable.
    """
    rows = weight.shape[0]
    matrix = weight.data.reshape(rows, -1).astype(np.float64)
    u = state.u.astype(np.float64)
    v = _normalize(matrix.T @ u)
    for _ in range(iterations):
        v = _normalize(matrix.T @ u)
        u = _normalize(matrix @ v)
    if is_grad_enabled():
        state.u = u.astype(state.u.dtype)

    flat = ops.reshape(weight, (rows, -1))
    sigma = ops.sum(flat * np.outer(u, v))
    if sigma.item() < SN_EPSILON:
        sigma = Tensor(SN_EPSILON)
    return weight / sigma


class Conv1d(Module):
    """1-D convolution over (batch, channels, length) with optional spectral norm."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        *,
        padding: int | tuple[int, int] = 0,
        dilation: int = 1,
        spectral: bool = False,
        zero_init: bool = False,
        sn_iterations: int = 1,
    ):
        super().__init__()
        fan_in = in_channels * kernel_size
        shape = (out_channels, in_channels, kernel_size)
        if zero_init:
            self.weight = Parameter(np.zeros(shape))
            self.bias = Parameter(np.zeros(out_channels))
        else:
            self.weight = Parameter(_uniform_fan_in(rng, shape, fan_in))
            self.bias = Parameter(_uniform_fan_in(rng, (out_channels,), fan_in))
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.padding = padding
        self.dilation = dilation
        self.sn_iterations = sn_iterations
        self.sn = SpectralNorm(self, out_channels, rng) if spectral else None

    def effective_weight(self, iterations: int | None = None) -> Tensor:
        if self.sn is None:
            return self.weight
        return spectral_normalize(
            self.weight, self.sn, iterations or self.sn_iterations
        )

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[1] != self.in_channels:  # noqa: PLR2004
            msg = f"Conv1d expects (batch, {self.in_channels}, length), got {x.shape}"
            raise DimensionError(msg)
        return ops.conv1d(
            x,
            self.effective_weight(),
            self.bias,
            padding=self.padding,
            dilation=self.dilation,
        )


class Linear(Module):
    """Fully connected layer on (batch, features)."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        *,
        spectral: bool = False,
        sn_iterations: int = 1,
    ):
        super().__init__()
        self.weight = Parameter(
            _uniform_fan_in(rng, (out_features, in_features), in_features)
        )
        self.bias = Parameter(_uniform_fan_in(rng, (out_features,), in_features))
        self.in_features = in_features
        self.sn_iterations = sn_iterations
        self.sn = SpectralNorm(self, out_features, rng) if spectral else None

    def effective_weight(self, iterations: int | None = None) -> Tensor:
        if self.sn is None:
            return self.weight
        return spectral_normalize(
            self.weight, self.sn, iterations or self.sn_iterations
        )

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            msg = f"Linear expects {self.in_features} features, got {x.shape}"
            raise DimensionError(msg)
        weight = self.effective_weight()
        return ops.matmul(x, ops.transpose(weight, (1, 0))) + self.bias


class IndexEmbedding(Module):
    """Trainable lookup table mapping a series index to a dense vector."""

    def __init__(self, n_series: int, dim: int, rng: np.random.Generator):
        super().__init__()
        self.table = Parameter(rng.normal(0.0, 0.01, size=(n_series, dim)))

    @property
    def n_series(self) -> int:
        return self.table.shape[0]

    def forward(self, indices) -> Tensor:
        return ops.take_rows(self.table, np.atleast_1d(np.asarray(indices)))
