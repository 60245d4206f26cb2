"""Tests for the downstream scenario builders."""

import numpy as np
import pytest

from app.data import (
    make_augmentation_mix,
    make_augmentation_scenario,
    make_cold_start_scenario,
    make_far_forecast_scenario,
    make_sinusoid_panel,
    make_stretch_scenario,
)
from app.data.scenarios import STRETCH_BANDS, mask_runs, scenario_from_json, scenario_to_json
from app.errors import ConfigError, DimensionError


@pytest.fixture
def wide_panel():
    return make_sinusoid_panel(n_series=10, length=2000, test_length=224, seed=1)


def test_far_forecast_starts(panel):
    """Window w starts 32·w points after the training end; nothing past the split is visible."""
    scenario = make_far_forecast_scenario(panel)

    assert scenario.forecast_starts == [panel.split_index + 32 * w for w in range(7)]
    observed = scenario.observed_before(scenario.forecast_starts[3])
    assert observed[:, : panel.split_index].all()
    assert not observed[:, panel.split_index :].any()


def test_far_forecast_needs_enough_test_points(panel):
    """Seven windows of 32 need 224 test points."""
    with pytest.raises(ConfigError):
        make_far_forecast_scenario(panel, n_windows=8)


@pytest.mark.parametrize("length", [50, 110])
def test_stretch_fraction_in_band(wide_panel, length):
    """Hidden share of the training range lands in the reference band."""
    scenario = make_stretch_scenario(wide_panel, stretch_length=length, seed=4)

    low, high = STRETCH_BANDS[length]
    assert low <= scenario.missing_fraction <= high
    assert all(run_length == length for _, _, run_length in mask_runs(scenario.mask))
    assert all(start >= wide_panel.split_index // 2 for _, start, _ in mask_runs(scenario.mask))
    assert scenario.mask[:, wide_panel.split_index :].all()


def test_stretch_outside_band_rejected():
    """One short series cannot hold a single 50-point stretch inside the band."""
    small = make_sinusoid_panel(n_series=1, length=400, test_length=224, seed=1)

    with pytest.raises(ConfigError, match="outside"):
        make_stretch_scenario(small, stretch_length=50)


def test_stretch_ground_truth_untouched(wide_panel):
    """The mask hides inputs; panel values are not modified."""
    scenario = make_stretch_scenario(wide_panel, seed=2)

    np.testing.assert_array_equal(scenario.panel.values, wide_panel.values)


def test_stretch_rejects_unknown_length(wide_panel):
    """Only the reference lengths are supported."""
    with pytest.raises(ConfigError):
        make_stretch_scenario(wide_panel, stretch_length=70)


def test_stretch_is_seeded(wide_panel):
    """Same seed, same mask."""
    a = make_stretch_scenario(wide_panel, seed=9).mask
    b = make_stretch_scenario(wide_panel, seed=9).mask

    np.testing.assert_array_equal(a, b)


def test_cold_start_selection(wide_panel):
    """20% of 10 series keep only their last 24 training points."""
    scenario = make_cold_start_scenario(wide_panel, fraction=0.2, seed=0)

    assert len(scenario.cold_start) == 2  # noqa: PLR2004
    split = wide_panel.split_index
    for i in scenario.cold_start:
        assert scenario.mask[i, :split].sum() == 24  # noqa: PLR2004
        assert scenario.mask[i, split - 24 : split].all()
    warm = [i for i in range(10) if i not in scenario.cold_start]
    assert scenario.mask[warm].all()
    assert scenario.forecast_starts == [split]


@pytest.mark.parametrize(("fraction", "count"), [(0.1, 1), (0.3, 3)])
def test_cold_start_counts(wide_panel, fraction, count):
    """⌈fraction·N⌉ series go cold."""
    assert len(make_cold_start_scenario(wide_panel, fraction).cold_start) == count


def test_augmentation_mix_is_mean():
    """Mixed batch is the elementwise average."""
    mixed = make_augmentation_mix(np.array([[0.0, 2.0]]), np.array([[2.0, 2.0]]))

    np.testing.assert_array_equal(mixed, [[1.0, 2.0]])
    with pytest.raises(DimensionError):
        make_augmentation_mix(np.zeros((1, 2)), np.zeros((1, 3)))


def test_augmentation_scenario_mixes_training_windows(panel):
    """Full training windows are averaged with synthetic ones; the test range stays real."""
    scenario = make_augmentation_scenario(
        panel, lambda series, starts: np.zeros((len(series), 16)), window=16
    )

    covered = (panel.split_index // 16) * 16
    np.testing.assert_allclose(scenario.panel.values[:, :covered], 0.5 * panel.values[:, :covered])
    np.testing.assert_array_equal(scenario.panel.values[:, covered:], panel.values[:, covered:])


def test_mask_runs():
    """Maximal hidden runs per series."""
    mask = np.ones((2, 8), dtype=bool)
    mask[0, 2:5] = False
    mask[1, 7] = False

    assert mask_runs(mask) == [[0, 2, 3], [1, 7, 1]]


def test_scenario_json_roundtrip(wide_panel):
    """Scenario documents restore the mask, kind and cold-start list."""
    scenario = make_cold_start_scenario(wide_panel, fraction=0.3, seed=5)

    restored = scenario_from_json(scenario_to_json(scenario))

    np.testing.assert_array_equal(restored.mask, scenario.mask)
    assert restored.kind == "cold_start"
    assert restored.cold_start == scenario.cold_start
    np.testing.assert_allclose(restored.panel.values, wide_panel.values)
