"""Hand-computed cases for the LSGAN objectives and the moment penalty."""

import numpy as np
import pytest

from app.errors import DimensionError
from app.gan import lsgan_d_loss, lsgan_g_loss, moment_loss
from app.tensor import Parameter, Tensor, backward


def test_d_loss_zero_at_targets():
    """D scoring reals at b and fakes at a has zero loss."""
    loss = lsgan_d_loss(Tensor(np.ones(4)), Tensor(np.zeros(4)))

    assert loss.item() == pytest.approx(0.0)


def test_d_loss_one_when_swapped():
    """Swapped scores cost ½ + ½."""
    loss = lsgan_d_loss(Tensor(np.zeros(4)), Tensor(np.ones(4)))

    assert loss.item() == pytest.approx(1.0)


def test_g_loss_half_at_zero_scores():
    """½·mean((0 − 1)²) = 0.5."""
    assert lsgan_g_loss(Tensor(np.zeros(5))).item() == pytest.approx(0.5)


def test_d_loss_custom_targets():
    """Targets a=-1, b=1 with scores 0 give ½ + ½."""
    loss = lsgan_d_loss(Tensor(np.zeros(2)), Tensor(np.zeros(2)), real_target=1.0, fake_target=-1.0)

    assert loss.item() == pytest.approx(1.0)


def test_moment_loss_example():
    """Mean gap 0.2 plus std gap 0.2."""
    fake = Tensor(np.array([0.1, 0.1, 0.5, 0.5]))
    real = Tensor(np.array([0.1, 0.1, 0.1, 0.1]))

    # μ: 0.3 vs 0.1, σ: 0.2 vs 0.0
    assert moment_loss(fake, real).item() == pytest.approx(0.4, abs=1e-6)


def test_moment_loss_zero_for_identical_batches(rng):
    """Identical batches match both moments."""
    batch = rng.normal(size=(3, 16))

    assert moment_loss(Tensor(batch), Tensor(batch)).item() == pytest.approx(0.0, abs=1e-6)


def test_moment_loss_differentiable_in_fake(rng):
    """Gradients flow to the generated batch only."""
    fake = Parameter(rng.normal(size=(2, 8)))
    real = Tensor(rng.normal(loc=1.0, size=(2, 8)))

    backward(moment_loss(fake, real))

    assert fake.grad is not None
    assert np.all(np.isfinite(fake.grad))


def test_shape_mismatch():
    """Misaligned batches raise."""
    with pytest.raises(DimensionError):
        moment_loss(Tensor(np.zeros((2, 8))), Tensor(np.zeros((2, 16))))
    with pytest.raises(DimensionError):
        lsgan_d_loss(Tensor(np.zeros(2)), Tensor(np.zeros(3)))
