"""Shared fixtures: seeded streams, small panels and tiny models."""

from pathlib import Path

import numpy as np
import pytest

from app.data import SeriesPanel, make_sinusoid_panel
from app.gan import GanConfig
from app.storage import LocalStorage
from app.tensor import make_rng


@pytest.fixture
def rng() -> np.random.Generator:
    """Deterministic stream for test inputs."""
    return make_rng(1234, "tests")


@pytest.fixture
def panel() -> SeriesPanel:
    """Four raw sinusoid series, 400 hourly points, last 224 held out."""
    return make_sinusoid_panel(n_series=4, length=400, test_length=224, seed=3)


@pytest.fixture
def tiny_config() -> GanConfig:
    """τ=16 (two growth stages) with narrow feature maps."""
    return GanConfig(target_length=16, n_series=4, channels=8, seed=5)


@pytest.fixture
def storage(tmp_path: Path) -> LocalStorage:
    return LocalStorage(tmp_path / "outputs")
