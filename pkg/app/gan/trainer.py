"""Progressive LSGAN training with moment matching."""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.data.features import time_features
from app.data.panel import MinMaxScaler, SeriesPanel
from app.data.windows import admissible_starts, feature_windows, history, value_windows
from app.errors import ConfigError, NumericError
from app.gan.checkpoint import save_gan
from app.gan.losses import lsgan_d_loss, lsgan_g_loss, moment_loss
from app.gan.model import Discriminator, GanConfig, Generator, grow, levels_for, pad_context
from app.gan.optim import Adam
from app.logging import log_stage
from app.storage import Storage
from app.tensor import Tensor, backward, make_rng, no_grad, ops

__all__ = [
    "AlignedBatch",
    "GanTrainer",
    "TrainConfig",
    "TrainResult",
    "TrainingData",
    "default_epochs",
    "prepare_training_data",
    "sample_batch",
    "schedule_stage",
    "train",
]

logger = logging.getLogger(__name__)


def default_epochs(target_length: int) -> int:
    """Reference budget: one stage per 1000 epochs plus 1500 to settle."""
    return 1000 * levels_for(target_length) + 1500


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(6500, gt=0)
    batches_per_epoch: int = Field(100, gt=0)
    batch_size: int = Field(512, gt=0)
    stage_epochs: int = Field(1000, gt=0)
    fade_epochs: int = Field(500, gt=0)
    lr: float = Field(5e-4, gt=0)
    betas: tuple[float, float] = (0.9, 0.999)
    moment_loss_weight: float = Field(1.0, ge=0)
    # LSGAN targets: a (fake, for D), b (real, for D), c (fake, for G)
    fake_target: float = 0.0
    real_target: float = 1.0
    generator_target: float = 1.0
    self_attention: bool = True
    fade_in: bool = True
    moment_loss: bool = True
    context_length: int = Field(0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def validate_fade(self):
        if self.fade_epochs > self.stage_epochs:
            msg = f"fade_epochs {self.fade_epochs} exceeds stage_epochs {self.stage_epochs}"
            raise ValueError(msg)
        return self

    def flags(self) -> dict[str, bool | int]:
        return {
            "self_attention": self.self_attention,
            "fade_in": self.fade_in,
            "moment_loss": self.moment_loss,
            "context_length": self.context_length,
        }


def schedule_stage(epoch: int, cfg: TrainConfig, levels: int) -> tuple[int, float]:
    """
    Growth stage and fade-in alpha for an epoch.

    A stage is added every `stage_epochs` up to `levels`; the newest stage fades
    in linearly over `fade_epochs`. Stage 1, and any run without fade-in, uses
    alpha = 1.
    """
    stage = min(1 + epoch // cfg.stage_epochs, levels)
    if stage == 1 or not cfg.fade_in:
        return stage, 1.0
    offset = epoch - (stage - 1) * cfg.stage_epochs
    return stage, min(1.0, offset / cfg.fade_epochs)


@dataclass
class TrainingData:
    """Scaled values, observation mask and covariates ready for window sampling."""

    values: np.ndarray
    mask: np.ndarray | None
    features: np.ndarray
    split_index: int
    scaler: MinMaxScaler
    start: str
    series: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)

    @property
    def n_series(self) -> int:
        return self.values.shape[0]


def prepare_training_data(
    panel: SeriesPanel,
    target_length: int,
    mask: np.ndarray | None = None,
    per_series_scaling: bool = False,
) -> TrainingData:
    """
    Scale by observed training values and index every admissible window.

    A window is admissible when it lies in the training range and every point
    in it is observed.
    """
    raw = panel.raw_values()
    train = raw[:, : panel.split_index]
    if mask is not None:
        train = np.where(mask[:, : panel.split_index], train, np.nan)
    scaler = MinMaxScaler.fit(train, per_series=per_series_scaling)
    series, starts = admissible_starts(mask, panel.n_series, panel.split_index, target_length)
    if len(series) == 0:
        msg = (
            f"no fully observed training window of length {target_length} "
            f"(training range {panel.split_index})"
        )
        raise ConfigError(msg)
    return TrainingData(
        values=scaler.transform(raw),
        mask=mask,
        features=time_features(panel.start, panel.length + target_length),
        split_index=panel.split_index,
        scaler=scaler,
        start=panel.start.isoformat(),
        series=series,
        starts=starts,
    )


@dataclass
class AlignedBatch:
    """Real windows and the generator inputs drawn for the same (series, start) pairs."""

    real: np.ndarray
    series: np.ndarray
    starts: np.ndarray
    time_feats: np.ndarray
    noise: np.ndarray
    context: np.ndarray | None = None
    context_mask: np.ndarray | None = None

    def real_at(self, stage: int, levels: int) -> np.ndarray:
        """Real windows average-pooled by 2**(levels - stage)."""
        factor = 1 << (levels - stage)
        if factor == 1:
            return self.real
        return ops.avg_pool(Tensor(self.real), factor, factor).data


def sample_batch(
    data: TrainingData,
    batch_size: int,
    target_length: int,
    rng: np.random.Generator,
    context_length: int = 0,
) -> AlignedBatch:
    """Uniform draw over admissible (series, start) pairs."""
    pick = rng.integers(len(data.series), size=batch_size)
    series = data.series[pick]
    starts = data.starts[pick]
    context = context_mask = None
    if context_length:
        context, context_mask = pad_context(
            history(data.values, data.mask, series, starts, context_length), context_length
        )
    return AlignedBatch(
        real=value_windows(data.values, series, starts, target_length),
        series=series,
        starts=starts,
        time_feats=feature_windows(data.features, starts, target_length),
        noise=rng.standard_normal((batch_size, target_length)),
        context=context,
        context_mask=context_mask,
    )


@dataclass
class TrainResult:
    generator: Generator
    discriminator: Discriminator
    checkpoint_key: str
    metrics_key: str
    grow_events: list[dict] = field(default_factory=list)
    alpha_trace: list[float] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)


def _finite(value: Tensor, what: str, epoch: int) -> float:
    number = value.item()
    if not np.isfinite(number):
        msg = f"non-finite {what} ({number}) at epoch {epoch}"
        raise NumericError(msg)
    return number


class GanTrainer:
    """Owns one generator/discriminator pair, their optimizers and the run outputs."""

    def __init__(
        self,
        data: TrainingData,
        cfg: TrainConfig,
        gan_config: GanConfig,
        storage: Storage,
        run_dir: str,
    ):
        self.data = data
        self.cfg = cfg
        self.storage = storage
        self.run_dir = run_dir
        self.generator = Generator(gan_config)
        self.discriminator = Discriminator(gan_config)
        self.g_opt = Adam(self.generator.named_parameters(), cfg.lr, cfg.betas)
        self.d_opt = Adam(self.discriminator.named_parameters(), cfg.lr, cfg.betas)
        self.rng = make_rng(cfg.seed, "batches")
        self.target_length = gan_config.target_length
        self.levels = gan_config.levels
        self.metrics_key = f"{run_dir}/metrics.jsonl"
        self.checkpoint_key = f"{run_dir}/checkpoint.bin"
        self._last_good: tuple[dict, dict, int, float] | None = None

    def checkpoint_extra(self) -> dict:
        return {
            "scaler": self.data.scaler.to_dict(),
            "start": self.data.start,
            "split_index": self.data.split_index,
            "train": self.cfg.model_dump(mode="json"),
        }

    def save(self, key: str) -> str:
        return save_gan(
            self.storage, key, self.generator, self.discriminator, self.checkpoint_extra()
        )

    def train_step(self, batch: AlignedBatch, stage: int, epoch: int) -> tuple[float, float, float]:
        """One discriminator update then one generator update on the same batch."""
        cfg = self.cfg
        real = Tensor(batch.real_at(stage, self.levels))
        inputs = (batch.noise, batch.series, batch.time_feats, batch.context, batch.context_mask)

        with no_grad():
            fake = self.generator(*inputs).values
        d_loss = lsgan_d_loss(
            self.discriminator(real, batch.series, batch.time_feats),
            self.discriminator(fake, batch.series, batch.time_feats),
            real_target=cfg.real_target,
            fake_target=cfg.fake_target,
        )
        d_value = _finite(d_loss, "discriminator loss", epoch)
        backward(d_loss)
        self.d_opt.step()

        sample = self.generator(*inputs).values
        adversarial = lsgan_g_loss(
            self.discriminator(sample, batch.series, batch.time_feats),
            target=cfg.generator_target,
        )
        ml = moment_loss(sample, real)
        g_loss = adversarial + cfg.moment_loss_weight * ml if cfg.moment_loss else adversarial
        g_value = _finite(g_loss, "generator loss", epoch)
        backward(g_loss)
        self.g_opt.step()
        self.discriminator.zero_grad()
        return d_value, g_value, ml.item()

    def fit(self) -> TrainResult:
        cfg = self.cfg
        result = TrainResult(
            generator=self.generator,
            discriminator=self.discriminator,
            checkpoint_key=self.checkpoint_key,
            metrics_key=self.metrics_key,
        )
        self.storage.save(self.metrics_key, "")
        logger.info(
            f"Training {cfg.epochs} epochs x {cfg.batches_per_epoch} batches of "
            f"{cfg.batch_size} on {len(self.data.series)} windows (levels={self.levels})"
        )
        try:
            for epoch in range(cfg.epochs):
                stage, alpha = schedule_stage(epoch, cfg, self.levels)
                with log_stage(stage):
                    if stage > self.generator.growth_stage:
                        self._grow(epoch, stage, result)
                    self.generator.alpha = self.discriminator.alpha = alpha
                    result.alpha_trace.append(alpha)
                    record = self._run_epoch(epoch, stage, alpha)
                result.history.append(record)
                self.storage.append(self.metrics_key, json.dumps(record, sort_keys=True) + "\n")
                self._last_good = (
                    self.generator.state_dict(),
                    self.discriminator.state_dict(),
                    stage,
                    alpha,
                )
        except NumericError:
            logger.exception("Training diverged; keeping the last good checkpoint")
            self._restore_last_good()
            raise
        self.save(self.checkpoint_key)
        return result

    def _run_epoch(self, epoch: int, stage: int, alpha: float) -> dict:
        totals = np.zeros(3)
        for _ in range(self.cfg.batches_per_epoch):
            batch = sample_batch(
                self.data,
                self.cfg.batch_size,
                self.target_length,
                self.rng,
                self.cfg.context_length,
            )
            totals += self.train_step(batch, stage, epoch)
        d_loss, g_loss, ml = (totals / self.cfg.batches_per_epoch).tolist()
        logger.info(
            f"epoch {epoch} stage {stage} alpha {alpha:.3f} "
            f"d_loss {d_loss:.5f} g_loss {g_loss:.5f} ml {ml:.5f}"
        )
        return {
            "epoch": epoch,
            "stage": stage,
            "alpha": alpha,
            "d_loss": d_loss,
            "g_loss": g_loss,
            "ml": ml,
            **self.cfg.flags(),
        }

    def _grow(self, epoch: int, stage: int, result: TrainResult) -> None:
        previous = self.generator.growth_stage
        self.save(f"{self.run_dir}/checkpoint_stage{previous}.bin")
        before = self.generator.parameter_count() + self.discriminator.parameter_count()
        grow(self.generator, self.discriminator, stage)
        self.g_opt.add_params(self.generator.named_parameters())
        self.d_opt.add_params(self.discriminator.named_parameters())
        after = self.generator.parameter_count() + self.discriminator.parameter_count()
        result.grow_events.append(
            {"epoch": epoch, "stage": stage, "parameters_before": before, "parameters_after": after}
        )

    def _restore_last_good(self) -> None:
        if self._last_good is None:
            logger.warning("No completed epoch to checkpoint")
            return
        g_state, d_state, stage, alpha = self._last_good
        if stage == self.generator.growth_stage:
            self.generator.load_state_dict(g_state)
            self.discriminator.load_state_dict(d_state)
            self.generator.alpha = self.discriminator.alpha = alpha
            self.save(self.checkpoint_key)
        else:
            # the epoch that failed had just grown; the stage checkpoint holds the last good state
            logger.warning(f"Last good state is checkpoint_stage{stage}.bin")


def train(
    panel: SeriesPanel,
    cfg: TrainConfig,
    gan_config: GanConfig,
    storage: Storage,
    run_dir: str,
    mask: np.ndarray | None = None,
    per_series_scaling: bool = False,
) -> TrainResult:
    """Scale `panel`, then run the full progressive schedule."""
    data = prepare_training_data(panel, gan_config.target_length, mask, per_series_scaling)
    return GanTrainer(data, cfg, gan_config, storage, run_dir).fit()
