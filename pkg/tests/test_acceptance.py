"""Long-running acceptance checks on trained models. Run with `pytest -m slow`."""

import json

import numpy as np
import pytest

from app.data import make_sinusoid_panel, make_stretch_scenario
from app.data.windows import admissible_starts, value_windows
from app.evaluation import impute_values, moving_average_impute, nrmse
from app.fid import EncoderConfig, context_fid, train_encoder
from app.gan import Discriminator, GanConfig, GanSampler, Generator, TrainConfig, grow, train
from app.gan.trainer import GanTrainer, prepare_training_data
from app.storage import LocalStorage
from app.tensor import no_grad

pytestmark = pytest.mark.slow


def test_discriminator_spectral_norm_bound(panel, storage):
    """After 200 training steps every SN layer of D has σ_max ≤ 1.05."""
    gan_config = GanConfig(target_length=16, n_series=panel.n_series, channels=8, seed=0)
    cfg = TrainConfig(epochs=20, batches_per_epoch=10, batch_size=16, stage_epochs=10, fade_epochs=5)
    trainer = GanTrainer(prepare_training_data(panel, 16), cfg, gan_config, storage, "sn-bound")
    trainer.fit()

    layers = trainer.discriminator.spectral_layers()
    assert layers
    with no_grad():
        for layer in layers:
            weight = layer.effective_weight(iterations=50).data
            sigma = np.linalg.svd(weight.reshape(weight.shape[0], -1), compute_uv=False)[0]
            assert sigma <= 1.05  # noqa: PLR2004


@pytest.mark.parametrize("switch", ["self_attention", "fade_in", "moment_loss"])
def test_ablation_switches_change_metrics(panel, storage, switch):
    """Each ablation completes and logs metrics that differ from the full model."""
    gan_config = GanConfig(target_length=32, n_series=panel.n_series, channels=8, seed=0)
    base = {"epochs": 3, "batches_per_epoch": 2, "batch_size": 8, "stage_epochs": 1, "fade_epochs": 1}

    train(panel, TrainConfig(**base), gan_config, storage, "full")
    ablated_gan = gan_config.model_copy(update={"self_attention": False}) if switch == "self_attention" else gan_config
    train(panel, TrainConfig(**base, **{switch: False}), ablated_gan, storage, "ablated")

    full = [json.loads(line) for line in storage.read("full/metrics.jsonl").splitlines()]
    ablated = [json.loads(line) for line in storage.read("ablated/metrics.jsonl").splitlines()]
    assert len(full) == len(ablated) == 3  # noqa: PLR2004
    assert ablated[-1][switch] is False
    assert full != ablated


def test_context_fid_orders_noise_levels(storage):
    """Scores grow with added noise and white noise scores far above the data."""
    panel = make_sinusoid_panel(n_series=20, length=1000, seed=7)
    encoder = train_encoder(panel, EncoderConfig(steps=150, seed=0), window_length=64)
    low, high = panel.train_values.min(), panel.train_values.max()
    values = (panel.train_values - low) / (high - low)
    pool = admissible_starts(None, panel.n_series, panel.split_index, 64)

    def noisy(epsilon: float):
        def synthetic(series, starts, rng):
            windows = value_windows(values, series, starts, 64)
            return windows + epsilon * rng.standard_normal(windows.shape)

        return synthetic

    def score(fn) -> float:
        return context_fid(encoder, values, fn, pool, n_windows=512, window_length=64, draws=2).mean

    scores = [score(noisy(eps)) for eps in (0.0, 0.1, 0.3)]
    white = score(lambda series, starts, rng: rng.standard_normal((len(series), 64)))

    assert scores[0] == pytest.approx(0.0, abs=1e-6)
    assert scores[0] < scores[1] < scores[2]
    assert white > 10 * scores[1]


@pytest.fixture(scope="module")
def gapped(tmp_path_factory):
    """Daily and half-daily sinusoids with 50-point gaps, and a GAN trained around the gaps."""
    panel = make_sinusoid_panel(n_series=6, length=1000, periods=(24, 12), noise=0.05, seed=11)
    scenario = make_stretch_scenario(panel, stretch_length=50, seed=0)
    data = prepare_training_data(panel, 32, scenario.mask)
    gan_config = GanConfig(target_length=32, n_series=panel.n_series, channels=16, seed=0)
    cfg = TrainConfig(epochs=60, batches_per_epoch=10, batch_size=32, stage_epochs=30, fade_epochs=10)
    storage = LocalStorage(tmp_path_factory.mktemp("gapped") / "outputs")
    result = GanTrainer(data, cfg, gan_config, storage, "gapped").fit()

    untrained = Generator(gan_config)
    grow(untrained, Discriminator(gan_config), 2)
    untrained.alpha = 1.0
    return {
        "panel": panel,
        "scenario": scenario,
        "data": data,
        "trained": GanSampler(result.generator, data.scaler, data.start, data.split_index),
        "untrained": GanSampler(untrained, data.scaler, data.start, data.split_index),
    }


def test_context_fid_ranks_trained_untrained_and_noise(gapped):
    """A trained generator scores below an untrained one and below uniform noise."""
    panel, data = gapped["panel"], gapped["data"]
    encoder = train_encoder(panel, EncoderConfig(steps=150, seed=0), window_length=32)
    pool = admissible_starts(None, panel.n_series, panel.split_index, 32)

    def score(fn) -> float:
        return context_fid(encoder, data.values, fn, pool, n_windows=512, window_length=32, draws=2).mean

    trained = score(gapped["trained"].sample_scaled)
    untrained = score(gapped["untrained"].sample_scaled)
    noise = score(lambda series, starts, rng: rng.uniform(0.0, 1.0, (len(series), 32)))

    assert trained < untrained
    assert trained < noise


def test_gan_imputation_beats_moving_average(gapped):
    """Averaged over sampling seeds, generated gap fills are closer to the truth than a trailing mean."""
    scenario = gapped["scenario"]
    raw = scenario.panel.raw_values()
    hidden = ~scenario.mask

    baseline = nrmse(moving_average_impute(raw, scenario.mask)[hidden], raw[hidden])
    generated = [
        nrmse(impute_values(gapped["trained"], raw, scenario.mask, seed=seed)[hidden], raw[hidden])
        for seed in range(3)
    ]

    assert np.mean(generated) < baseline
