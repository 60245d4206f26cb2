"""Progressively grown generator and discriminator stacks."""

import logging
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.errors import ConfigError, ContractError, DimensionError
from app.nn import Conv1d, IndexEmbedding, Linear, MainBlock, Module
from app.tensor import Tensor, make_rng, ops

__all__ = [
    "BASE_LENGTH",
    "MAX_LEVELS",
    "ContextBlock",
    "Discriminator",
    "GanConfig",
    "GanSample",
    "Generator",
    "grow",
    "levels_for",
    "pad_context",
    "sample_length",
]

logger = logging.getLogger(__name__)

BASE_LENGTH = 8
MAX_LEVELS = 5


def levels_for(target_length: int) -> int:
    """L such that target_length == 2**(L + 3), for L in [1, 5]."""
    levels = int(target_length).bit_length() - 4
    if (
        target_length < 2 * BASE_LENGTH
        or target_length & (target_length - 1)
        or levels > MAX_LEVELS
    ):
        msg = (
            f"target_length must be a power of two between 16 and "
            f"{BASE_LENGTH << MAX_LEVELS}, got {target_length}"
        )
        raise ConfigError(msg)
    return levels


def sample_length(stage: int) -> int:
    """Length of generated samples (and discriminator inputs) at a growth stage."""
    return BASE_LENGTH << stage


class GanConfig(BaseModel):
    """Architecture of one generator/discriminator pair."""

    model_config = ConfigDict(frozen=True)

    target_length: int
    n_series: int
    channels: int = 32
    embedding_dim: int = 10
    time_features: int = 5
    self_attention: bool = True
    context_length: int = 0
    seed: int = 0

    @property
    def levels(self) -> int:
        return levels_for(self.target_length)

    @property
    def conditioning_channels(self) -> int:
        return self.embedding_dim + self.time_features


@dataclass
class GanSample:
    """Generator output in model space, with the (series, start) pairs it was drawn for."""

    values: Tensor
    series_index: np.ndarray
    starts: np.ndarray | None = None


def pad_context(values: np.ndarray, context_length: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Left-pad (batch, n) history to (batch, context_length) with zeros.

    Returns the padded values and an observation indicator (1 observed, 0 pad).
    NaN entries count as unobserved. Histories longer than the context keep
    their most recent values.
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    values = values[:, -context_length:] if values.shape[1] else values
    batch, n = values.shape
    padded = np.zeros((batch, context_length))
    mask = np.zeros((batch, context_length))
    if n:
        observed = np.isfinite(values)
        padded[:, context_length - n :] = np.where(observed, values, 0.0)
        mask[:, context_length - n :] = observed
    return padded, mask


def _pool_to(x: Tensor, length: int) -> Tensor:
    factor = x.shape[-1] // length
    if factor * length != x.shape[-1]:
        msg = f"cannot pool length {x.shape[-1]} to {length}"
        raise DimensionError(msg)
    return x if factor == 1 else ops.avg_pool(x, factor, factor)


def _broadcast_time(vectors: Tensor, length: int) -> Tensor:
    """(batch, d) -> (batch, d, length)."""
    batch, dim = vectors.shape
    return ops.broadcast_to(ops.reshape(vectors, (batch, dim, 1)), (batch, dim, length))


def _check_alpha(alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        msg = f"fade-in alpha must lie in [0, 1], got {alpha}"
        raise ContractError(msg)
    return float(alpha)


class ContextBlock(Module):
    """Two 1×1 convolutions mixing observed history into a stage's features."""

    def __init__(self, channels: int, context_length: int, rng: np.random.Generator):
        super().__init__()
        self.context_length = context_length
        self.hidden = Conv1d(channels + 2 * context_length, channels, 1, rng)
        self.out = Conv1d(channels, channels, 1, rng, zero_init=True)

    def forward(self, stage_out: Tensor, context: Tensor, mask: Tensor) -> Tensor:
        if context.shape[-1] != self.context_length:
            msg = f"context length {context.shape[-1]} != {self.context_length}"
            raise DimensionError(msg)
        features = _broadcast_time(ops.concat([context, mask], axis=1), stage_out.shape[-1])
        h = ops.leaky_relu(self.hidden(ops.concat([stage_out, features], axis=1)))
        return stage_out + self.out(h)


class Generator(Module):
    """
    G = g_{s+1} ∘ … ∘ g_1 at growth stage s.

    noise ⊕ embedding ⊕ time features are projected to `channels` and pooled to
    length 8. Stage 1 refines that map in place; each later stage doubles the
    length. After every stage the map is re-concatenated with the conditioning
    pooled to its length and projected back. The output layer upsamples once
    more, so samples at stage s have length 2**(s + 3).
    """

    def __init__(self, config: GanConfig):
        super().__init__()
        self.config = config
        self.levels = config.levels
        rng = make_rng(config.seed, "generator", 0)
        channels = config.channels
        self.embedding = IndexEmbedding(config.n_series, config.embedding_dim, rng)
        self.input_proj = Conv1d(
            1 + config.conditioning_channels, channels, 1, rng, spectral=True
        )
        self.blocks: list[MainBlock] = []
        self.projections: list[Conv1d] = []
        self.outputs: list[Conv1d] = []
        self.contexts: list[ContextBlock] = []
        self.growth_stage = 0
        self.alpha = 1.0
        self.add_stage()

    @property
    def has_context(self) -> bool:
        return self.config.context_length > 0

    @property
    def output_length(self) -> int:
        return sample_length(self.growth_stage)

    def add_stage(self) -> None:
        stage = self.growth_stage + 1
        rng = make_rng(self.config.seed, "generator", stage)
        channels = self.config.channels
        self.blocks.append(
            MainBlock(channels, rng, self_attention=self.config.self_attention)
        )
        projection = Conv1d(
            channels + self.config.conditioning_channels, channels, 1, rng, spectral=True
        )
        output = Conv1d(channels, 1, 3, rng, padding=1, spectral=True)
        if self.projections:
            projection.load_state_dict(self.projections[-1].state_dict())
            output.load_state_dict(self.outputs[-1].state_dict())
        self.projections.append(projection)
        self.outputs.append(output)
        if self.has_context:
            self.contexts.append(
                ContextBlock(channels, self.config.context_length, rng)
            )
        self.growth_stage = stage
        self.alpha = 1.0 if stage == 1 else 0.0

    def conditioning(self, idx_emb: Tensor, time_feats) -> Tensor:
        """(batch, embedding_dim + time_features, τ) conditioning stack."""
        time_feats = ops.tensor(time_feats)
        expected = (idx_emb.shape[0], self.config.time_features, self.config.target_length)
        if time_feats.shape != expected:
            msg = f"time features must have shape {expected}, got {time_feats.shape}"
            raise DimensionError(msg)
        return ops.concat(
            [_broadcast_time(idx_emb, self.config.target_length), time_feats], axis=1
        )

    def preprocess(self, noise, idx_emb: Tensor, time_feats) -> Tensor:
        """Z̃_0: (batch, channels, 8)."""
        noise = ops.tensor(noise)
        levels_for(noise.shape[-1])
        if noise.shape[-1] != self.config.target_length:
            msg = f"noise length {noise.shape[-1]} != target length {self.config.target_length}"
            raise DimensionError(msg)
        return self._project_input(noise, self.conditioning(idx_emb, time_feats))

    def _project_input(self, noise: Tensor, cond: Tensor) -> Tensor:
        stacked = ops.concat(
            [ops.reshape(noise, (noise.shape[0], 1, noise.shape[-1])), cond], axis=1
        )
        return _pool_to(self.input_proj(stacked), BASE_LENGTH)

    def stage_forward(
        self,
        stage: int,
        z: Tensor,
        cond: Tensor,
        alpha: float = 1.0,
        context: tuple[Tensor, Tensor] | None = None,
    ) -> Tensor:
        """
        Apply g_stage to the previous map.

        The newest stage (stage > 1) blends its block with the plain upscaled
        path: alpha·m(UP(z)) + (1 - alpha)·UP(z). Re-concatenation with the
        pooled conditioning happens after the blend, on both paths alike.
        """
        alpha = _check_alpha(alpha)
        block = self.blocks[stage - 1]
        if stage == 1:
            h = block(z)
        else:
            up = ops.upsample_linear(z)
            h = block(up)
            if stage == self.growth_stage:
                h = alpha * h + (1.0 - alpha) * up
        h = self.projections[stage - 1](
            ops.concat([h, _pool_to(cond, h.shape[-1])], axis=1)
        )
        if self.contexts and context is not None:
            h = self.contexts[stage - 1](h, *context)
        return h

    def forward(
        self,
        noise,
        series_idx,
        time_feats,
        context: np.ndarray | None = None,
        context_mask: np.ndarray | None = None,
        starts: np.ndarray | None = None,
    ) -> GanSample:
        series_idx = np.atleast_1d(np.asarray(series_idx, dtype=np.int64))
        ctx = None
        if self.has_context:
            if context is None:
                msg = "this generator was built with a context block; context is required"
                raise ContractError(msg)
            context = np.asarray(context, dtype=np.float64)
            if context_mask is None:
                context, context_mask = pad_context(context, self.config.context_length)
            ctx = (Tensor(context), Tensor(context_mask))

        idx_emb = self.embedding(series_idx)
        cond = self.conditioning(idx_emb, time_feats)
        noise = ops.tensor(noise)
        levels_for(noise.shape[-1])
        z = self._project_input(noise, cond)
        for stage in range(1, self.growth_stage + 1):
            z = self.stage_forward(
                stage,
                z,
                cond,
                self.alpha if stage == self.growth_stage else 1.0,
                ctx,
            )
        out = self.outputs[self.growth_stage - 1](ops.upsample_linear(z))
        values = ops.reshape(out, (out.shape[0], out.shape[-1]))
        return GanSample(values=values, series_index=series_idx, starts=starts)


class Discriminator(Module):
    """
    D = d_1 ∘ … ∘ d_{s+1} at growth stage s.

    c₁ (kernel 1) ingests sample ⊕ embedding ⊕ time features; stage blocks
    apply DOWN(m(·)) until length 8; d_1 is m, conv, LR and a fully connected
    head. Every convolution and the head are spectrally normalised.
    """

    def __init__(self, config: GanConfig):
        super().__init__()
        self.config = config
        self.levels = config.levels
        rng = make_rng(config.seed, "discriminator", 0)
        channels = config.channels
        self.embedding = IndexEmbedding(config.n_series, config.embedding_dim, rng)
        self.input_conv = Conv1d(
            1 + config.conditioning_channels, channels, 1, rng, spectral=True
        )
        self.head_block = MainBlock(channels, rng, self_attention=config.self_attention)
        self.head_conv = Conv1d(channels, 1, 3, rng, padding=1, spectral=True)
        self.head_fc = Linear(BASE_LENGTH, 1, rng, spectral=True)
        self.blocks: list[MainBlock] = []
        self.growth_stage = 0
        self.alpha = 1.0
        self.add_stage()

    @property
    def input_length(self) -> int:
        return sample_length(self.growth_stage)

    def add_stage(self) -> None:
        stage = self.growth_stage + 1
        rng = make_rng(self.config.seed, "discriminator", stage)
        self.blocks.append(
            MainBlock(self.config.channels, rng, self_attention=self.config.self_attention)
        )
        self.growth_stage = stage
        self.alpha = 1.0 if stage == 1 else 0.0

    def spectral_layers(self) -> list[Conv1d | Linear]:
        layers: list[Conv1d | Linear] = []

        def collect(module: Module) -> None:
            if isinstance(module, Conv1d | Linear) and module.sn is not None:
                layers.append(module)
            for _, child in module._children():
                collect(child)

        collect(self)
        return layers

    def forward(self, sample, series_idx, time_feats, alpha: float | None = None) -> Tensor:
        alpha = _check_alpha(self.alpha if alpha is None else alpha)
        sample = ops.tensor(sample)
        batch, length = sample.shape[0], sample.shape[-1]
        if length != self.input_length:
            msg = (
                f"discriminator at stage {self.growth_stage} accepts length "
                f"{self.input_length}, got {sample.shape}"
            )
            raise DimensionError(msg)
        series_idx = np.atleast_1d(np.asarray(series_idx, dtype=np.int64))
        time_feats = _pool_to(ops.tensor(time_feats), length)
        idx_emb = _broadcast_time(self.embedding(series_idx), length)
        x = ops.concat([ops.reshape(sample, (batch, 1, length)), idx_emb, time_feats], axis=1)
        y = ops.leaky_relu(self.input_conv(x))

        for stage in range(self.growth_stage, 0, -1):
            down = ops.avg_pool(self.blocks[stage - 1](y))
            if stage == self.growth_stage and stage > 1:
                down = alpha * down + (1.0 - alpha) * ops.avg_pool(y)
            y = down

        y = ops.leaky_relu(self.head_conv(self.head_block(y)))
        score = self.head_fc(ops.reshape(y, (batch, BASE_LENGTH)))
        return ops.reshape(score, (batch,))


def grow(generator: Generator, discriminator: Discriminator, new_stage: int) -> None:
    """Add stage `new_stage` to both networks; alpha restarts at 0."""
    current = generator.growth_stage
    if discriminator.growth_stage != current:
        msg = f"generator at stage {current}, discriminator at {discriminator.growth_stage}"
        raise ContractError(msg)
    if new_stage != current + 1 or new_stage > generator.levels:
        msg = f"cannot grow from stage {current} to {new_stage} (levels={generator.levels})"
        raise ContractError(msg)
    before = generator.parameter_count() + discriminator.parameter_count()
    generator.add_stage()
    discriminator.add_stage()
    after = generator.parameter_count() + discriminator.parameter_count()
    logger.info(
        f"Grew to stage {new_stage}: sample length {sample_length(new_stage)}, "
        f"parameters {before} -> {after}"
    )
