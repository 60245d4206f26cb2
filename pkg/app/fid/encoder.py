"""Causal dilated convolutional encoder trained with a triplet objective."""

import logging
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.data.panel import SeriesPanel, minmax_scale
from app.data.windows import admissible_starts
from app.errors import ConfigError, ContractError, MissingArtifactError, MissingEncoderError
from app.gan.checkpoint import Checkpoint, encode_checkpoint, read_checkpoint
from app.gan.optim import Adam
from app.nn import Conv1d, Linear, Module
from app.storage import Storage
from app.tensor import Tensor, backward, make_rng, no_grad, ops

__all__ = [
    "CausalEncoder",
    "EncoderConfig",
    "EncoderTrainer",
    "TripletBatch",
    "embed",
    "load_encoder",
    "save_encoder",
    "train_encoder",
]

logger = logging.getLogger(__name__)


class EncoderConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    depth: int = Field(4, gt=0)
    channels: int = Field(32, gt=0)
    dim: int = Field(32, gt=0)
    kernel: int = Field(3, gt=1)
    negatives: int = Field(4, gt=0)
    steps: int = Field(300, gt=0)
    batch: int = Field(64, gt=0)
    lr: float = Field(1e-3, gt=0)
    seed: int = 0


class CausalEncoder(Module):
    """
    Residual stack of causal convolutions with dilations 1, 2, 4, …, a global
    max over time and a linear head.

    Every convolution is left-padded, so the feature at step t only sees inputs
    at steps ≤ t.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        rng = make_rng(config.seed, "encoder")
        self.input_conv = Conv1d(1, config.channels, 1, rng)
        self.layers: list[Conv1d] = []
        for i in range(config.depth):
            dilation = 2**i
            self.layers.append(
                Conv1d(
                    config.channels,
                    config.channels,
                    config.kernel,
                    rng,
                    padding=((config.kernel - 1) * dilation, 0),
                    dilation=dilation,
                )
            )
        self.head = Linear(config.channels, config.dim, rng)

    @property
    def min_length(self) -> int:
        """The deepest layer's dilation must fit inside the window."""
        return 2 ** (self.config.depth - 1) + 1

    def features(self, windows) -> Tensor:
        """(batch, channels, length) causal features before pooling."""
        x = ops.tensor(windows)
        batch, length = x.shape
        if length < self.min_length:
            msg = f"windows of length {length} are shorter than the encoder minimum {self.min_length}"
            raise ContractError(msg)
        h = self.input_conv(ops.reshape(x, (batch, 1, length)))
        for layer in self.layers:
            h = h + ops.leaky_relu(layer(h))
        return h

    def forward(self, windows) -> Tensor:
        return self.head(ops.max(self.features(windows), axis=-1))


def embed(encoder: CausalEncoder, windows: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    """(n, dim) embeddings in float64, without gradient tracking."""
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    parts = []
    with no_grad():
        for lo in range(0, len(windows), batch_size):
            parts.append(encoder(windows[lo : lo + batch_size]).data.astype(np.float64))
    if not parts:
        return np.empty((0, encoder.config.dim))
    return np.concatenate(parts, axis=0)


@dataclass
class TripletBatch:
    """Anchor, positive and negative subwindows for one optimisation step."""

    anchor: np.ndarray
    positive: np.ndarray
    negatives: np.ndarray


class EncoderTrainer:
    """
    Triplet training on minmax-scaled training windows.

    Each step draws one anchor length in [max(min_length, τ/2), τ]. Anchors are
    random subwindows of a τ window, positives random subwindows of their
    anchor, and negatives come from other series (or any position when the
    panel holds a single series).
    """

    def __init__(self, values: np.ndarray, config: EncoderConfig, window_length: int, mask=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.config = config
        self.window_length = window_length
        self.encoder = CausalEncoder(config)
        if window_length < self.encoder.min_length:
            msg = (
                f"windows of length {window_length} are shorter than the encoder "
                f"minimum {self.encoder.min_length}"
            )
            raise ConfigError(msg)
        self.series, self.starts = admissible_starts(
            mask, self.values.shape[0], self.values.shape[1], window_length
        )
        if len(self.series) == 0:
            msg = (
                f"dataset of length {self.values.shape[1]} has no window of "
                f"{window_length} points for encoder training"
            )
            raise ConfigError(msg)
        self.rng = make_rng(config.seed, "encoder", "triplets")
        self.optimizer = Adam(self.encoder.named_parameters(), config.lr)
        self.losses: list[float] = []

    def sample(self) -> TripletBatch:
        cfg, rng, tau = self.config, self.rng, self.window_length
        low = max(self.encoder.min_length, tau // 2)
        anchor_length = int(rng.integers(low, tau + 1))
        positive_length = int(rng.integers(self.encoder.min_length, anchor_length + 1))

        pick = rng.integers(len(self.series), size=cfg.batch)
        series, starts = self.series[pick], self.starts[pick]
        anchor_starts = starts + rng.integers(0, tau - anchor_length + 1, size=cfg.batch)
        positive_starts = anchor_starts + rng.integers(
            0, anchor_length - positive_length + 1, size=cfg.batch
        )

        n_series = self.values.shape[0]
        negative_series = rng.integers(n_series, size=(cfg.batch, cfg.negatives))
        if n_series > 1:
            # shift collisions onto another series
            same = negative_series == series[:, None]
            negative_series[same] = (
                negative_series[same] + rng.integers(1, n_series, size=int(same.sum()))
            ) % n_series
        negative_starts = rng.integers(
            0, self.values.shape[1] - positive_length + 1, size=(cfg.batch, cfg.negatives)
        )
        return TripletBatch(
            anchor=self._slice(series, anchor_starts, anchor_length),
            positive=self._slice(series, positive_starts, positive_length),
            negatives=self._slice(negative_series.ravel(), negative_starts.ravel(), positive_length),
        )

    def _slice(self, series: np.ndarray, starts: np.ndarray, length: int) -> np.ndarray:
        offsets = starts[:, None] + np.arange(length)[None, :]
        return np.nan_to_num(self.values[series[:, None], offsets])

    def step(self) -> float:
        cfg = self.config
        batch = self.sample()
        anchor = self.encoder(batch.anchor)
        positive = self.encoder(batch.positive)
        negatives = ops.reshape(
            self.encoder(batch.negatives), (cfg.batch, cfg.negatives, cfg.dim)
        )
        attract = ops.sum(anchor * positive, axis=-1)
        repel = ops.sum(
            ops.reshape(anchor, (cfg.batch, 1, cfg.dim)) * negatives, axis=-1
        )
        loss = -ops.mean(ops.log_sigmoid(attract)) - ops.mean(
            ops.sum(ops.log_sigmoid(-repel), axis=-1)
        )
        value = loss.item()
        backward(loss)
        self.optimizer.step()
        return value

    def fit(self) -> CausalEncoder:
        for step in range(self.config.steps):
            self.losses.append(self.step())
            if (step + 1) % 50 == 0:
                logger.info(f"encoder step {step + 1}/{self.config.steps} loss {self.losses[-1]:.4f}")
        self.encoder.freeze()
        return self.encoder


def train_encoder(
    panel: SeriesPanel,
    config: EncoderConfig,
    window_length: int,
    mask: np.ndarray | None = None,
) -> CausalEncoder:
    """Fit an encoder on the training range of `panel` (scaled first if raw)."""
    scaled, _ = minmax_scale(panel)
    values = scaled.train_values
    train_mask = None if mask is None else mask[:, : panel.split_index]
    if train_mask is not None:
        values = np.where(train_mask, values, np.nan)
    return EncoderTrainer(values, config, window_length, train_mask).fit()


def save_encoder(storage: Storage, key: str, encoder: CausalEncoder, extra: dict | None = None) -> str:
    checkpoint = Checkpoint(
        kind="encoder",
        config=encoder.config.model_dump(),
        arrays=encoder.state_dict(),
        extra=extra or {},
    )
    storage.save_bytes(key, encode_checkpoint(checkpoint))
    logger.info(f"Saved encoder {key}")
    return key


def load_encoder(storage: Storage, key: str) -> CausalEncoder:
    try:
        checkpoint = read_checkpoint(storage, key)
    except MissingArtifactError as e:
        msg = f"encoder not found at {key}; train one with --set train_encoder=true"
        raise MissingEncoderError(msg) from e
    if checkpoint.kind != "encoder":
        msg = f"{key} holds a {checkpoint.kind!r} checkpoint, expected 'encoder'"
        raise ContractError(msg)
    encoder = CausalEncoder(EncoderConfig(**checkpoint.config))
    encoder.load_state_dict(checkpoint.arrays)
    encoder.freeze()
    return encoder
