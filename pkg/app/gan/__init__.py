"""PSA-GAN networks, objectives, optimisation and checkpoints."""

from app.gan.checkpoint import Checkpoint, load_gan, read_checkpoint, save_gan
from app.gan.losses import lsgan_d_loss, lsgan_g_loss, moment_loss
from app.gan.model import Discriminator, GanConfig, Generator, grow, levels_for
from app.gan.optim import Adam, AdamState, adam_step
from app.gan.sampling import GanSampler
from app.gan.trainer import TrainConfig, TrainResult, default_epochs, schedule_stage, train

__all__ = [
    "Adam",
    "AdamState",
    "Checkpoint",
    "Discriminator",
    "GanConfig",
    "GanSampler",
    "Generator",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "default_epochs",
    "grow",
    "levels_for",
    "load_gan",
    "lsgan_d_loss",
    "lsgan_g_loss",
    "moment_loss",
    "read_checkpoint",
    "save_gan",
    "schedule_stage",
    "train",
]
