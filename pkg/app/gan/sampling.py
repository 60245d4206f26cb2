"""Drawing raw-unit windows from a trained generator."""

import logging
import threading

import numpy as np
import pandas as pd

from app.data.features import time_features
from app.data.panel import MinMaxScaler
from app.data.windows import feature_windows
from app.gan.checkpoint import load_gan
from app.gan.model import Generator
from app.storage import Storage
from app.tensor import no_grad, ops

__all__ = ["GanSampler"]

logger = logging.getLogger(__name__)


class GanSampler:
    """
    Frozen generator plus the scaler and calendar it was trained with.

    Samples are conditioned on (series index, start) pairs, where starts are
    offsets from the training panel's first timestamp. A generator checkpointed
    before its last stage is upsampled to the target length.
    """

    def __init__(
        self, generator: Generator, scaler: MinMaxScaler, start: str, split_index: int
    ):
        self.generator = generator
        self.scaler = scaler
        self.start = pd.Timestamp(start)
        self.split_index = split_index
        self._features = np.zeros((5, 0))
        self._features_lock = threading.Lock()
        generator.freeze()

    @classmethod
    def from_checkpoint(cls, storage: Storage, key: str) -> "GanSampler":
        generator, _, checkpoint = load_gan(storage, key)
        logger.info(f"Loaded generator from {key} at stage {generator.growth_stage}")
        return cls(
            generator,
            MinMaxScaler.from_dict(checkpoint.extra["scaler"]),
            checkpoint.extra["start"],
            checkpoint.extra["split_index"],
        )

    @property
    def n_series(self) -> int:
        return self.generator.config.n_series

    @property
    def target_length(self) -> int:
        return self.generator.config.target_length

    @property
    def context_length(self) -> int:
        return self.generator.config.context_length

    def features(self, stop: int) -> np.ndarray:
        """Calendar features covering [0, stop), computed once and extended on demand."""
        with self._features_lock:
            features = self._features
            if features.shape[1] < stop:
                features = time_features(self.start, max(stop, 2 * features.shape[1]))
                self._features = features
        return features

    def sample_scaled(
        self,
        series: np.ndarray,
        starts: np.ndarray,
        rng: np.random.Generator,
        context: np.ndarray | None = None,
    ) -> np.ndarray:
        """(batch, τ) samples in model space."""
        series = np.asarray(series, dtype=np.int64)
        starts = np.asarray(starts, dtype=np.int64)
        tau = self.target_length
        features = self.features(int(starts.max()) + tau)
        noise = rng.standard_normal((len(series), tau))
        with no_grad():
            values = self.generator(
                noise, series, feature_windows(features, starts, tau), context
            ).values
            while values.shape[-1] < tau:
                values = ops.upsample_linear(values)
        return values.data.astype(np.float64)

    def sample(
        self,
        series: np.ndarray,
        starts: np.ndarray,
        rng: np.random.Generator,
        context: np.ndarray | None = None,
    ) -> np.ndarray:
        """
        (batch, τ) samples back-scaled to raw units.

        `context` is raw-unit history (NaN where unobserved) for models built
        with a context block.
        """
        series = np.asarray(series, dtype=np.int64)
        if context is not None:
            context = self.scaler.transform(np.asarray(context, dtype=np.float64), series)
        scaled = self.sample_scaled(series, starts, rng, context)
        return self.scaler.inverse_transform(scaled, series)
