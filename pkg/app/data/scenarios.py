"""Downstream scenarios: far forecasting, missing stretches, cold starts, augmentation."""

import json
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np
from pydantic import BaseModel

from app.data.panel import SeriesPanel
from app.data.windows import rolling_starts
from app.errors import ConfigError, DimensionError
from app.tensor import make_rng

__all__ = [
    "COLD_START_HISTORY",
    "STRETCH_BANDS",
    "ScenarioDataset",
    "ScenarioManifest",
    "make_augmentation_mix",
    "make_augmentation_scenario",
    "make_cold_start_scenario",
    "make_far_forecast_scenario",
    "make_stretch_scenario",
    "mask_runs",
    "scenario_from_json",
    "scenario_to_json",
]

logger = logging.getLogger(__name__)

COLD_START_HISTORY = 24
STRETCH_BANDS: dict[int, tuple[float, float]] = {50: (0.054, 0.077), 110: (0.099, 0.169)}
_MAX_PLACEMENT_ATTEMPTS = 200_000


class ScenarioManifest(BaseModel):
    kind: str
    params: dict
    seed: int
    missing_fraction: float
    cold_start_ids: list[str] = []
    forecast_starts: list[int] = []


@dataclass
class ScenarioDataset:
    """
    A panel plus its observation mask (True = observed).

    The mask only hides model inputs. Ground truth in `panel` is never
    modified, so metrics always read the original values.
    """

    panel: SeriesPanel
    mask: np.ndarray
    kind: str
    params: dict
    seed: int
    cold_start: list[int] = field(default_factory=list)
    forecast_starts: list[int] = field(default_factory=list)

    @property
    def missing_fraction(self) -> float:
        """Share of unobserved points in the training range."""
        return float(1.0 - self.mask[:, : self.panel.split_index].mean())

    def observed_before(self, start: int) -> np.ndarray:
        """
        Observation mask seen by a forecast starting at `start`.

        Nothing from `start` on is visible. Far-forecast scenarios also hide the
        test points between the training end and the window start.
        """
        mask = self.mask.copy()
        cut = self.panel.split_index if self.kind == "far_forecast" else start
        mask[:, min(cut, start) :] = False
        return mask

    def manifest(self) -> ScenarioManifest:
        return ScenarioManifest(
            kind=self.kind,
            params=self.params,
            seed=self.seed,
            missing_fraction=round(self.missing_fraction, 9),
            cold_start_ids=[self.panel.series_ids[i] for i in self.cold_start],
            forecast_starts=self.forecast_starts,
        )


def make_far_forecast_scenario(
    panel: SeriesPanel, window: int = 32, n_windows: int = 7, seed: int = 0
) -> ScenarioDataset:
    """Rolling windows after the training end; window w sits 32·w points past it."""
    needed = window * n_windows
    if panel.test_length < needed:
        msg = f"far-forecast needs {needed} test points, panel has {panel.test_length}"
        raise ConfigError(msg)
    starts = [panel.split_index + window * w for w in range(n_windows)]
    return ScenarioDataset(
        panel=panel,
        mask=np.ones(panel.values.shape, dtype=bool),
        kind="far_forecast",
        params={"window": window, "n_windows": n_windows},
        seed=seed,
        forecast_starts=starts,
    )


def _place_stretches(
    n_series: int,
    lo: int,
    hi: int,
    length: int,
    needed: int,
    rng: np.random.Generator,
) -> list[tuple[int, int]]:
    """Random non-touching runs of `length` inside [lo, hi) until `needed` are placed."""
    placed: dict[int, list[int]] = {}
    runs: list[tuple[int, int]] = []
    attempts = 0
    while len(runs) < needed:
        attempts += 1
        if attempts > _MAX_PLACEMENT_ATTEMPTS:
            msg = f"could not place {needed} stretches of length {length} in [{lo}, {hi})"
            raise ConfigError(msg)
        series = int(rng.integers(n_series))
        start = int(rng.integers(lo, hi - length + 1))
        taken = placed.setdefault(series, [])
        # runs must be separated by at least one observed point
        if any(start <= other + length and other <= start + length for other in taken):
            continue
        taken.append(start)
        runs.append((series, start))
    return runs


def make_stretch_scenario(
    panel: SeriesPanel,
    stretch_length: int = 50,
    seed: int = 0,
    window: int = 32,
    n_windows: int = 7,
) -> ScenarioDataset:
    """
    Hide contiguous runs of `stretch_length` in the second half of the training range.

    Runs are drawn until the hidden share of the training range reaches the
    middle of the reference band for that length. Panels too small to land
    inside the band raise `ConfigError`.
    """
    if stretch_length not in STRETCH_BANDS:
        msg = f"stretch_length must be one of {sorted(STRETCH_BANDS)}, got {stretch_length}"
        raise ConfigError(msg)
    lo = panel.split_index // 2
    hi = panel.split_index
    if stretch_length > hi - lo:
        msg = f"stretch of {stretch_length} exceeds the second training half ({hi - lo} points)"
        raise ConfigError(msg)

    low, high = STRETCH_BANDS[stretch_length]
    target = 0.5 * (low + high)
    total = panel.n_series * panel.split_index
    needed = max(1, math.ceil(target * total / stretch_length))
    rng = make_rng(seed, "scenario", "stretch", stretch_length)
    runs = _place_stretches(panel.n_series, lo, hi, stretch_length, needed, rng)

    mask = np.ones(panel.values.shape, dtype=bool)
    for series, start in runs:
        mask[series, start : start + stretch_length] = False
    scenario = ScenarioDataset(
        panel=panel,
        mask=mask,
        kind="stretch",
        params={"stretch_length": stretch_length, "runs": len(runs)},
        seed=seed,
        forecast_starts=rolling_starts(panel.split_index, panel.length, window)[:n_windows],
    )
    achieved = scenario.missing_fraction
    if not low <= achieved <= high:
        msg = (
            f"missing fraction {achieved:.4f} outside [{low}, {high}]: {panel.n_series} series of "
            f"{panel.split_index} training points cannot hold stretches of {stretch_length} in band"
        )
        raise ConfigError(msg)
    logger.info(f"Placed {len(runs)} stretches of {stretch_length}, missing {achieved:.2%}")
    return scenario


def make_cold_start_scenario(
    panel: SeriesPanel, fraction: float = 0.1, seed: int = 0
) -> ScenarioDataset:
    """Keep only the last 24 training points of ⌈fraction·N⌉ random series."""
    count = math.ceil(round(fraction * panel.n_series, 9))
    if count < 1:
        msg = f"cold-start fraction {fraction} selects no series out of {panel.n_series}"
        raise ConfigError(msg)
    if panel.split_index < COLD_START_HISTORY:
        msg = f"training range of {panel.split_index} is shorter than {COLD_START_HISTORY}"
        raise ConfigError(msg)
    rng = make_rng(seed, "scenario", "cold_start")
    cold = sorted(int(i) for i in rng.choice(panel.n_series, size=count, replace=False))
    mask = np.ones(panel.values.shape, dtype=bool)
    for i in cold:
        mask[i, : panel.split_index - COLD_START_HISTORY] = False
    return ScenarioDataset(
        panel=panel,
        mask=mask,
        kind="cold_start",
        params={"fraction": fraction},
        seed=seed,
        cold_start=cold,
        forecast_starts=[panel.split_index],
    )


def make_augmentation_mix(real_batch: np.ndarray, synth_batch: np.ndarray) -> np.ndarray:
    """Elementwise mean of aligned real and synthetic batches."""
    real_batch = np.asarray(real_batch, dtype=np.float64)
    synth_batch = np.asarray(synth_batch, dtype=np.float64)
    if real_batch.shape != synth_batch.shape:
        msg = f"cannot mix batches of shape {real_batch.shape} and {synth_batch.shape}"
        raise DimensionError(msg)
    return 0.5 * (real_batch + synth_batch)


def make_augmentation_scenario(
    panel: SeriesPanel,
    sample_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    window: int,
    seed: int = 0,
) -> ScenarioDataset:
    """
    Replace each full `window` of the training range by its mix with a synthetic window.

    `sample_fn(series, starts)` returns aligned raw-unit samples of shape
    (batch, window). Trailing training points that do not fill a window stay real.
    """
    starts = np.arange(0, panel.split_index - window + 1, window)
    series = np.repeat(np.arange(panel.n_series), len(starts))
    starts = np.tile(starts, panel.n_series)
    offsets = starts[:, None] + np.arange(window)[None, :]
    values = panel.raw_values().copy()
    synthetic = sample_fn(series, starts)
    values[series[:, None], offsets] = make_augmentation_mix(
        values[series[:, None], offsets], synthetic
    )
    mixed = replace(panel, values=values, scaler=None)
    return ScenarioDataset(
        panel=mixed,
        mask=np.ones(values.shape, dtype=bool),
        kind="augmentation",
        params={"window": window, "windows": len(series)},
        seed=seed,
        forecast_starts=[panel.split_index],
    )


def mask_runs(mask: np.ndarray) -> list[list[int]]:
    """[series, start, length] for every maximal run of unobserved points."""
    runs = []
    for i, row in enumerate(mask):
        hidden = np.concatenate([[0], (~row).astype(np.int8), [0]])
        edges = np.flatnonzero(np.diff(hidden))
        runs.extend([i, int(a), int(b - a)] for a, b in zip(edges[::2], edges[1::2], strict=True))
    return runs


def scenario_to_json(scenario: ScenarioDataset) -> str:
    """Self-contained scenario document: manifest, raw panel and hidden runs."""
    panel = scenario.panel
    document = {
        "manifest": scenario.manifest().model_dump(mode="json"),
        "cold_start": scenario.cold_start,
        "panel": {
            "start": panel.start.isoformat(),
            "split_index": panel.split_index,
            "series_ids": panel.series_ids,
            "values": panel.raw_values().tolist(),
        },
        "hidden_runs": mask_runs(scenario.mask),
    }
    return json.dumps(document, sort_keys=True)


def scenario_from_json(text: str) -> ScenarioDataset:
    document = json.loads(text)
    manifest = ScenarioManifest(**document["manifest"])
    raw = document["panel"]
    panel = SeriesPanel(
        values=np.asarray(raw["values"], dtype=np.float64),
        start=raw["start"],
        split_index=raw["split_index"],
        series_ids=raw["series_ids"],
    )
    mask = np.ones(panel.values.shape, dtype=bool)
    for series, start, length in document["hidden_runs"]:
        mask[series, start : start + length] = False
    return ScenarioDataset(
        panel=panel,
        mask=mask,
        kind=manifest.kind,
        params=manifest.params,
        seed=manifest.seed,
        cold_start=document["cold_start"],
        forecast_starts=manifest.forecast_starts,
    )
