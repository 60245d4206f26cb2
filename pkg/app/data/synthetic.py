"""Desk-scale synthetic panels."""

from collections.abc import Sequence

import numpy as np
import pandas as pd

from app.data.panel import SeriesPanel
from app.tensor import make_rng

__all__ = ["make_sinusoid_panel"]


def make_sinusoid_panel(
    n_series: int = 20,
    length: int = 2000,
    periods: Sequence[int] = (24, 12, 48),
    noise: float = 0.1,
    trend: float = 0.0,
    seed: int = 0,
    start: str = "2021-01-04 00:00",
    test_length: int = 224,
) -> SeriesPanel:
    """
    Raw panel of positive sinusoids with per-series level, amplitude and phase.

    Series i uses period ``periods[i % len(periods)]``; `trend` adds a linear
    drift per hour; `noise` is the Gaussian noise scale.
    """
    rng = make_rng(seed, "synthetic-panel")
    t = np.arange(length, dtype=np.float64)
    rows = []
    for i in range(n_series):
        period = periods[i % len(periods)]
        level = rng.uniform(2.0, 4.0)
        amplitude = rng.uniform(0.5, 1.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal = level + amplitude * np.sin(2.0 * np.pi * t / period + phase) + trend * t
        rows.append(signal + noise * rng.standard_normal(length))
    return SeriesPanel(
        values=np.vstack(rows),
        start=pd.Timestamp(start),
        split_index=length - test_length,
        series_ids=[f"sine-{i}" for i in range(n_series)],
    )
