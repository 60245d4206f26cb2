"""Filling unobserved points: generator windows or a trailing moving average."""

import logging
from dataclasses import replace

import numpy as np

from app.data.panel import SeriesPanel
from app.data.scenarios import ScenarioDataset, mask_runs
from app.data.windows import history
from app.errors import CoverageError
from app.gan.sampling import GanSampler
from app.tensor import make_rng

__all__ = ["MOVING_AVERAGE_WINDOW", "gan_impute", "impute_values", "moving_average_impute"]

logger = logging.getLogger(__name__)

MOVING_AVERAGE_WINDOW = 10


def _covering_windows(start: int, length: int, window: int, total: int) -> list[int]:
    """Window starts stepping by window/2 until [start, start + length) is covered."""
    if total < window:
        msg = f"gap at {start} cannot be covered: series of {total} points, window {window}"
        raise CoverageError(msg)
    starts = []
    position = start
    while True:
        clamped = min(position, total - window)
        starts.append(clamped)
        if clamped + window >= start + length:
            return starts
        position += max(1, window // 2)


def impute_values(
    sampler: GanSampler,
    values: np.ndarray,
    mask: np.ndarray,
    seed: int = 0,
) -> np.ndarray:
    """
    Raw values with every unobserved point replaced by generator samples.

    Generated windows overlapping the same point are averaged there; observed
    points are copied through unchanged.
    """
    values = np.asarray(values, dtype=np.float64)
    completed = values.copy()
    runs = mask_runs(mask)
    if not runs:
        return completed
    tau = sampler.target_length
    series, starts = [], []
    for row, start, length in runs:
        for window_start in _covering_windows(start, length, tau, values.shape[1]):
            series.append(row)
            starts.append(window_start)
    series = np.asarray(series, dtype=np.int64)
    starts = np.asarray(starts, dtype=np.int64)

    context = None
    if sampler.context_length:
        context = history(values, mask, series, starts, sampler.context_length)
    samples = sampler.sample(series, starts, make_rng(seed, "impute"), context)

    total = np.zeros_like(values)
    count = np.zeros_like(values)
    offsets = starts[:, None] + np.arange(tau)[None, :]
    np.add.at(total, (series[:, None], offsets), samples)
    np.add.at(count, (series[:, None], offsets), 1.0)
    hidden = ~mask
    completed[hidden] = total[hidden] / count[hidden]
    logger.info(f"Imputed {int(hidden.sum())} points with {len(series)} generated windows")
    return completed


def gan_impute(sampler: GanSampler, scenario: ScenarioDataset, seed: int = 0) -> SeriesPanel:
    """Completed raw panel for a scenario."""
    completed = impute_values(sampler, scenario.panel.raw_values(), scenario.mask, seed)
    return replace(scenario.panel, values=completed, scaler=None)


def moving_average_impute(
    values: np.ndarray, mask: np.ndarray, window: int = MOVING_AVERAGE_WINDOW
) -> np.ndarray:
    """
    Fill each unobserved point, left to right, with the mean of the `window`
    preceding (observed or already imputed) values.

    Points with nothing before them take the series' first observed value.
    """
    completed = np.asarray(values, dtype=np.float64).copy()
    for row, start, length in mask_runs(mask):
        observed = np.flatnonzero(mask[row])
        fallback = completed[row, observed[0]] if observed.size else 0.0
        for t in range(start, start + length):
            previous = completed[row, max(0, t - window) : t]
            completed[row, t] = previous.mean() if previous.size else fallback
    return completed
