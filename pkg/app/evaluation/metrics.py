"""Forecast error and the rank/linear correlations used to compare models."""

import numpy as np
from scipy import stats

from app.errors import DimensionError, UndefinedMetricError

__all__ = ["nrmse", "pearson", "spearman"]


def nrmse(forecast, target) -> float:
    """Root mean squared error divided by the mean absolute target, in raw units."""
    forecast = np.asarray(forecast, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if forecast.shape != target.shape:
        msg = f"forecast shape {forecast.shape} != target shape {target.shape}"
        raise DimensionError(msg)
    scale = np.abs(target).mean()
    if scale == 0:
        msg = "NRMSE is undefined for an all-zero target"
        raise UndefinedMetricError(msg)
    return float(np.sqrt(np.mean((forecast - target) ** 2)) / scale)


def _paired(x, y, what: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2:  # noqa: PLR2004
        msg = f"{what} needs two equally long samples of at least 2 values, got {x.shape} and {y.shape}"
        raise DimensionError(msg)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        msg = f"{what} correlation is undefined for a constant sample"
        raise UndefinedMetricError(msg)
    return x, y


def pearson(x, y) -> float:
    x, y = _paired(x, y, "pearson")
    return float(stats.pearsonr(x, y).statistic)


def spearman(x, y) -> float:
    """Rank correlation; ties share their average rank."""
    x, y = _paired(x, y, "spearman")
    return float(stats.spearmanr(x, y).statistic)
