"""Tests for dataset ingestion, scaling, covariates and window slicing."""

import json

import numpy as np
import pandas as pd
import pytest

from app.data import MinMaxScaler, load_panel, minmax_scale, time_features
from app.data.panel import panel_to_jsonlines
from app.data.windows import admissible_starts, history, rolling_starts, value_windows
from app.errors import ConfigError, CoverageError, DegenerateSeriesError, IngestionError


def write_csv(path, rows):
    frame = pd.DataFrame(rows, columns=["series_id", "timestamp", "value"])
    frame.to_csv(path, index=False)
    return path


def hourly_rows(series_id: str, n: int, start: str = "2021-01-01 00:00"):
    stamps = pd.date_range(start, periods=n, freq="h")
    return [(series_id, str(ts), float(i)) for i, ts in enumerate(stamps)]


def test_csv_ingestion_and_split(tmp_path):
    """Long-format CSV becomes an (N, T) panel with the test tail held out."""
    path = write_csv(tmp_path / "d.csv", hourly_rows("a", 30) + hourly_rows("b", 30))

    panel = load_panel(path, "csv", test_length=10)

    assert panel.values.shape == (2, 30)
    assert panel.series_ids == ["a", "b"]
    assert panel.split_index == 20  # noqa: PLR2004


def test_csv_split_timestamp(tmp_path):
    """A split timestamp sets the first test point."""
    path = write_csv(tmp_path / "d.csv", hourly_rows("a", 30))

    panel = load_panel(path, "csv", split_timestamp="2021-01-01 12:00")

    assert panel.split_index == 12  # noqa: PLR2004


def test_csv_gap_rejected(tmp_path):
    """A missing hourly stamp names the series and the stamp."""
    rows = hourly_rows("a", 10)
    del rows[4]
    path = write_csv(tmp_path / "d.csv", rows)

    with pytest.raises(IngestionError, match="'a' is missing 2021-01-01 04:00"):
        load_panel(path, "csv", test_length=2)


def test_csv_duplicate_rejected(tmp_path):
    """Duplicate (series, timestamp) rows report their line."""
    rows = hourly_rows("a", 10)
    rows.insert(3, rows[2])
    path = write_csv(tmp_path / "d.csv", rows)

    with pytest.raises(IngestionError, match=r"d.csv:5: duplicate"):
        load_panel(path, "csv", test_length=2)


def test_csv_non_numeric_rejected(tmp_path):
    """Unparsable values report their line."""
    rows = hourly_rows("a", 10)
    rows[6] = ("a", rows[6][1], "oops")
    path = write_csv(tmp_path / "d.csv", rows)

    with pytest.raises(IngestionError, match=r"d.csv:8: non-numeric"):
        load_panel(path, "csv", test_length=2)


def test_misaligned_series_rejected(tmp_path):
    """All series must share start and length."""
    path = write_csv(tmp_path / "d.csv", hourly_rows("a", 10) + hourly_rows("b", 9))

    with pytest.raises(IngestionError, match="'b'"):
        load_panel(path, "csv", test_length=2)


def test_jsonlines_roundtrip(tmp_path, panel):
    """Panels written as JSON lines read back identically."""
    path = tmp_path / "panel.jsonl"
    path.write_text(panel_to_jsonlines(panel))

    loaded = load_panel(path, "jsonlines", test_length=panel.test_length)

    np.testing.assert_allclose(loaded.values, panel.values)
    assert loaded.start == panel.start
    assert loaded.series_ids == panel.series_ids


def test_jsonlines_defaults_keep_every_point(tmp_path):
    """Two 48-point series load as N=2, T=48 with nothing held out by default."""
    path = tmp_path / "small.jsonl"
    lines = [json.dumps({"start": "2021-01-01 00:00", "target": list(range(48)), "item_id": name}) for name in "ab"]
    path.write_text("\n".join(lines) + "\n")

    panel = load_panel(path)

    assert (panel.n_series, panel.length) == (2, 48)
    assert panel.split_index == 48  # noqa: PLR2004
    assert panel.series_ids == ["a", "b"]


def test_jsonlines_malformed(tmp_path):
    """Non-numeric targets report their line number."""
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"start": "2021-01-01", "target": [1, 2]}) + "\n" + '{"start": "2021-01-01", "target": ["x"]}\n')

    with pytest.raises(IngestionError, match=":2:"):
        load_panel(path, "jsonlines", test_length=1)


def test_missing_dataset_is_config_error(tmp_path):
    """A dataset path that does not exist is a configuration problem."""
    with pytest.raises(ConfigError):
        load_panel(tmp_path / "absent.csv", "csv")


def test_minmax_uses_training_range(panel):
    """Training values map onto [0, 1]; test values may leave it; inverse restores raw."""
    scaled, scaler = minmax_scale(panel)

    assert scaled.train_values.min() == pytest.approx(0.0)
    assert scaled.train_values.max() == pytest.approx(1.0)
    np.testing.assert_allclose(scaler.inverse_transform(scaled.values), panel.values)
    np.testing.assert_allclose(scaled.raw_values(), panel.values)


def test_per_series_scaler(panel):
    """Each series gets its own extremes."""
    scaled, scaler = minmax_scale(panel, per_series=True)

    np.testing.assert_allclose(scaled.train_values.min(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(scaled.train_values.max(axis=1), 1.0)
    restored = MinMaxScaler.from_dict(scaler.to_dict())
    np.testing.assert_allclose(restored.transform(panel.values[[2]], [2]), scaled.values[[2]])


def test_constant_series_is_degenerate():
    """max == min makes scaling undefined."""
    with pytest.raises(DegenerateSeriesError):
        MinMaxScaler.fit(np.ones((2, 5)))


def test_time_features_ranges():
    """Calendar rows stay in [-0.5, 0.5]; age is log(2 + t)."""
    feats = time_features("2021-01-04 00:00", 24 * 400)

    assert feats.shape == (5, 24 * 400)
    assert feats[:4].min() >= -0.5
    assert feats[:4].max() <= 0.5
    assert feats[0, 0] == pytest.approx(-0.5)
    assert feats[0, 23] == pytest.approx(0.5)
    # 2021-01-04 is a Monday
    assert feats[1, 0] == pytest.approx(-0.5)
    np.testing.assert_allclose(feats[4, :3], np.log([2.0, 3.0, 4.0]))


def test_admissible_starts_respects_mask():
    """Windows must be fully observed and inside [0, stop)."""
    mask = np.ones((2, 10), dtype=bool)
    mask[1, 4] = False

    series, starts = admissible_starts(mask, 2, 10, 4)

    assert starts[series == 0].tolist() == [0, 1, 2, 3, 4, 5, 6]
    assert starts[series == 1].tolist() == [0, 5, 6]


def test_value_windows_out_of_range():
    """Windows past the end raise CoverageError."""
    with pytest.raises(CoverageError):
        value_windows(np.zeros((1, 5)), np.array([0]), np.array([3]), 4)


def test_history_pads_with_nan():
    """Points before the panel or hidden by the mask are NaN."""
    values = np.arange(10, dtype=np.float64).reshape(1, 10)
    mask = np.ones((1, 10), dtype=bool)
    mask[0, 1] = False

    out = history(values, mask, np.array([0]), np.array([3]), 5)

    np.testing.assert_array_equal(np.isnan(out[0]), [True, True, False, True, False])
    assert out[0, 2] == 0.0
    assert out[0, 4] == 2.0  # noqa: PLR2004


def test_rolling_starts():
    """Non-overlapping windows that fit."""
    assert rolling_starts(100, 200, 32) == [100, 132, 164]
