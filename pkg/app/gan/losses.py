"""Least-squares adversarial objectives and the moment-matching penalty."""

from app.errors import DimensionError
from app.tensor import Tensor, ops

__all__ = ["lsgan_d_loss", "lsgan_g_loss", "moment_loss"]


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        msg = f"{what}: shapes {a.shape} and {b.shape} differ"
        raise DimensionError(msg)


def lsgan_d_loss(
    real_scores: Tensor, fake_scores: Tensor, real_target: float = 1.0, fake_target: float = 0.0
) -> Tensor:
    """½·mean((D(x) - b)²) + ½·mean((D(G(z)) - a)²)."""
    real_scores, fake_scores = ops.tensor(real_scores), ops.tensor(fake_scores)
    _same_shape(real_scores, fake_scores, "lsgan_d_loss")
    real_term = ops.mean((real_scores - real_target) * (real_scores - real_target))
    fake_term = ops.mean((fake_scores - fake_target) * (fake_scores - fake_target))
    return 0.5 * real_term + 0.5 * fake_term


def lsgan_g_loss(fake_scores: Tensor, target: float = 1.0) -> Tensor:
    """½·mean((D(G(z)) - c)²)."""
    diff = ops.tensor(fake_scores) - target
    return 0.5 * ops.mean(diff * diff)


def _moments(batch: Tensor) -> tuple[Tensor, Tensor]:
    mu = ops.mean(batch)
    centered = batch - mu
    return mu, ops.sqrt(ops.mean(centered * centered))


def moment_loss(fake_batch: Tensor, real_batch: Tensor) -> Tensor:
    """
    |μ(fake) - μ(real)| + |σ(fake) - σ(real)| over all elements of each batch.

    σ is the population standard deviation of the flattened batch.
    """
    fake_batch, real_batch = ops.tensor(fake_batch), ops.tensor(real_batch)
    _same_shape(fake_batch, real_batch, "moment_loss")
    mu_fake, sigma_fake = _moments(fake_batch)
    mu_real, sigma_real = _moments(real_batch)
    return ops.abs(mu_fake - mu_real) + ops.abs(sigma_fake - sigma_real)
