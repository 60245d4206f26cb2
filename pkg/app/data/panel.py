"""Hourly series panels: ingestion, validation and minmax scaling."""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from app.errors import ConfigError, DegenerateSeriesError, IngestionError

__all__ = [
    "FREQ",
    "MinMaxScaler",
    "SeriesPanel",
    "load_panel",
    "minmax_scale",
    "panel_from_records",
    "panel_to_jsonlines",
]

logger = logging.getLogger(__name__)

FREQ = "h"


@dataclass
class MinMaxScaler:
    """
    Affine map of raw values onto [0, 1] using training-range extremes.

    Global scalers hold one (min, max) pair; per-series scalers hold one per
    series and need the series index when transforming.
    """

    minimum: np.ndarray
    maximum: np.ndarray
    per_series: bool = False

    @classmethod
    def fit(cls, train_values: np.ndarray, per_series: bool = False) -> "MinMaxScaler":
        if per_series:
            minimum = np.nanmin(train_values, axis=1)
            maximum = np.nanmax(train_values, axis=1)
            flat = np.flatnonzero(maximum == minimum)
            if flat.size:
                msg = f"series {flat.tolist()} are constant over the training range"
                raise DegenerateSeriesError(msg)
        else:
            minimum = np.array([np.nanmin(train_values)])
            maximum = np.array([np.nanmax(train_values)])
            if maximum[0] == minimum[0]:
                msg = f"dataset is constant ({minimum[0]}) over the training range"
                raise DegenerateSeriesError(msg)
        return cls(minimum=minimum, maximum=maximum, per_series=per_series)

    def _bounds(self, series_index) -> tuple[np.ndarray, np.ndarray]:
        if not self.per_series:
            return self.minimum[0], self.maximum[0]
        idx = np.asarray(series_index)
        lo, hi = self.minimum[idx], self.maximum[idx]
        return lo[..., None], hi[..., None]

    def transform(self, values: np.ndarray, series_index=None) -> np.ndarray:
        """Rows of `values` belong to `series_index` (all series when omitted)."""
        if series_index is None:
            series_index = np.arange(len(values))
        lo, hi = self._bounds(series_index)
        return (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)

    def inverse_transform(self, values: np.ndarray, series_index=None) -> np.ndarray:
        if series_index is None:
            series_index = np.arange(len(values))
        lo, hi = self._bounds(series_index)
        return np.asarray(values, dtype=np.float64) * (hi - lo) + lo

    def to_dict(self) -> dict:
        return {
            "minimum": self.minimum.tolist(),
            "maximum": self.maximum.tolist(),
            "per_series": self.per_series,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MinMaxScaler":
        return cls(
            minimum=np.asarray(data["minimum"], dtype=np.float64),
            maximum=np.asarray(data["maximum"], dtype=np.float64),
            per_series=bool(data["per_series"]),
        )


@dataclass
class SeriesPanel:
    """
    N equally long hourly series sharing one start timestamp.

    `values` is (N, T); positions [0, split_index) form the training range.
    `scaler` is set when the values are minmax scaled.
    """

    values: np.ndarray
    start: pd.Timestamp
    split_index: int
    series_ids: list[str] = field(default_factory=list)
    scaler: MinMaxScaler | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.start = pd.Timestamp(self.start)
        if not self.series_ids:
            self.series_ids = [str(i) for i in range(self.n_series)]
        if not 0 < self.split_index <= self.length:
            msg = f"split index {self.split_index} outside (0, {self.length}]"
            raise ConfigError(msg)

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def is_scaled(self) -> bool:
        return self.scaler is not None

    @property
    def train_values(self) -> np.ndarray:
        return self.values[:, : self.split_index]

    @property
    def test_length(self) -> int:
        return self.length - self.split_index

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=self.length, freq=FREQ)

    def with_values(self, values: np.ndarray) -> "SeriesPanel":
        return replace(self, values=np.asarray(values, dtype=np.float64))

    def raw_values(self) -> np.ndarray:
        if self.scaler is None:
            return self.values
        return self.scaler.inverse_transform(self.values)


def minmax_scale(panel: SeriesPanel, per_series: bool = False) -> tuple[SeriesPanel, MinMaxScaler]:
    """Scale with training-range extremes; test values may leave [0, 1]."""
    if panel.is_scaled:
        return panel, panel.scaler
    scaler = MinMaxScaler.fit(panel.train_values, per_series=per_series)
    scaled = replace(panel, values=scaler.transform(panel.values), scaler=scaler)
    return scaled, scaler


def _split_index(start: pd.Timestamp, length: int, split_timestamp, test_length: int | None) -> int:
    if split_timestamp is None:
        split = length - (test_length or 0)
        if split <= 0:
            msg = f"test_length {test_length} leaves no training range in {length} points"
            raise ConfigError(msg)
        return split
    offset = (pd.Timestamp(split_timestamp) - start) / pd.Timedelta(1, FREQ)
    if offset != int(offset) or not 0 < offset <= length:
        msg = f"split timestamp {split_timestamp} is not an hourly stamp inside the panel"
        raise ConfigError(msg)
    return int(offset)


def panel_from_records(
    records: list[tuple[str, pd.Timestamp, np.ndarray]],
    split_timestamp=None,
    test_length: int | None = None,
) -> SeriesPanel:
    """Assemble a panel from (series_id, start, values) triples that must align."""
    if not records:
        msg = "dataset contains no series"
        raise IngestionError(msg)
    first_id, start, first_values = records[0]
    for series_id, series_start, values in records[1:]:
        if series_start != start:
            msg = f"series {series_id!r} starts at {series_start}, expected {start} (as {first_id!r})"
            raise IngestionError(msg)
        if len(values) != len(first_values):
            msg = (
                f"series {series_id!r} has {len(values)} points, "
                f"expected {len(first_values)} (as {first_id!r})"
            )
            raise IngestionError(msg)
    values = np.vstack([r[2] for r in records])
    return SeriesPanel(
        values=values,
        start=start,
        split_index=_split_index(start, values.shape[1], split_timestamp, test_length),
        series_ids=[r[0] for r in records],
    )


def _read_csv(path: Path) -> list[tuple[str, pd.Timestamp, np.ndarray]]:
    frame = pd.read_csv(path, dtype={"series_id": str, "timestamp": str, "value": str})
    missing_cols = {"series_id", "timestamp", "value"} - set(frame.columns)
    if missing_cols:
        msg = f"{path}: missing columns {sorted(missing_cols)}"
        raise IngestionError(msg)

    numeric = pd.to_numeric(frame["value"], errors="coerce")
    bad = numeric.isna() | ~np.isfinite(numeric.fillna(0.0))
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        # header is line 1
        msg = f"{path}:{row + 2}: non-numeric value {frame['value'].iloc[row]!r}"
        raise IngestionError(msg)
    frame["value"] = numeric
    frame["timestamp"] = pd.to_datetime(frame["timestamp"])

    duplicated = frame.duplicated(["series_id", "timestamp"], keep="first")
    if duplicated.any():
        row = int(np.flatnonzero(duplicated.to_numpy())[0])
        msg = (
            f"{path}:{row + 2}: duplicate observation for series "
            f"{frame['series_id'].iloc[row]!r} at {frame['timestamp'].iloc[row]}"
        )
        raise IngestionError(msg)

    records = []
    for series_id, group in frame.groupby("series_id", sort=False):
        group = group.sort_values("timestamp")
        stamps = pd.DatetimeIndex(group["timestamp"])
        expected = pd.date_range(stamps[0], stamps[-1], freq=FREQ)
        gaps = expected.difference(stamps)
        if len(gaps) or len(expected) != len(stamps):
            first = gaps[0] if len(gaps) else "an off-grid timestamp"
            msg = f"{path}: series {series_id!r} is missing {first}"
            raise IngestionError(msg)
        records.append((str(series_id), stamps[0], group["value"].to_numpy(np.float64)))
    return records


def _read_jsonlines(path: Path) -> list[tuple[str, pd.Timestamp, np.ndarray]]:
    records = []
    with path.open(encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                item = json.loads(line)
                start = pd.Timestamp(item["start"])
                target = item["target"]
            except (ValueError, KeyError, TypeError) as e:
                msg = f"{path}:{number}: malformed record ({e})"
                raise IngestionError(msg) from e
            try:
                values = np.asarray(target, dtype=np.float64)
            except (ValueError, TypeError) as e:
                msg = f"{path}:{number}: non-numeric value in target"
                raise IngestionError(msg) from e
            if values.ndim != 1 or not np.all(np.isfinite(values)):
                msg = f"{path}:{number}: target must be a list of finite numbers"
                raise IngestionError(msg)
            series_id = str(item.get("item_id", len(records)))
            records.append((series_id, start, values))
    return records


def load_panel(
    path: str | Path,
    fmt: str = "jsonlines",
    split_timestamp=None,
    test_length: int | None = None,
) -> SeriesPanel:
    """
    Read a long-format CSV (series_id, timestamp, value) or JSON-lines file
    ({"start": ..., "target": [...], "item_id": ...} per line) into a raw panel.

    Without `split_timestamp` the last `test_length` points are held out;
    with neither, the whole panel is the training range.
    """
    path = Path(path)
    if not path.is_file():
        msg = f"dataset not found: {path}"
        raise ConfigError(msg)
    if fmt == "csv":
        records = _read_csv(path)
    elif fmt == "jsonlines":
        records = _read_jsonlines(path)
    else:
        msg = f"unknown dataset format {fmt!r}"
        raise ConfigError(msg)
    panel = panel_from_records(records, split_timestamp, test_length)
    logger.info(
        f"Loaded {panel.n_series} series of {panel.length} hourly points from {path} "
        f"(train {panel.split_index}, test {panel.test_length})"
    )
    return panel


def panel_to_jsonlines(panel: SeriesPanel, values: np.ndarray | None = None) -> str:
    """Serialise raw-unit values as JSON-lines records readable by `load_panel`."""
    values = panel.raw_values() if values is None else values
    start = panel.start.isoformat()
    lines = [
        json.dumps({"item_id": sid, "start": start, "target": row.tolist()})
        for sid, row in zip(panel.series_ids, values, strict=True)
    ]
    return "\n".join(lines) + "\n"
