"""Window slicing shared by training, scoring and evaluation."""

import numpy as np

from app.errors import CoverageError

__all__ = [
    "admissible_starts",
    "feature_windows",
    "history",
    "rolling_starts",
    "value_windows",
]


def admissible_starts(
    mask: np.ndarray | None,
    n_series: int,
    stop: int,
    length: int,
) -> tuple[np.ndarray, np.ndarray]:
    """
    All (series, start) pairs whose window [start, start + length) lies in
    [0, stop) and is fully observed under `mask` (True = observed).
    """
    n_starts = stop - length + 1
    if n_starts <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    if mask is None:
        ok = np.ones((n_series, n_starts), dtype=bool)
    else:
        missing = (~mask[:, :stop]).astype(np.int64)
        cumulative = np.concatenate(
            [np.zeros((n_series, 1), dtype=np.int64), np.cumsum(missing, axis=1)], axis=1
        )
        ok = (cumulative[:, length:] - cumulative[:, :n_starts]) == 0
    series, starts = np.nonzero(ok)
    return series.astype(np.int64), starts.astype(np.int64)


def rolling_starts(first: int, stop: int, size: int) -> list[int]:
    """Starts of consecutive non-overlapping windows of `size` in [first, stop)."""
    return list(range(first, stop - size + 1, size))


def value_windows(values: np.ndarray, series: np.ndarray, starts: np.ndarray, length: int) -> np.ndarray:
    """(batch, length) slices of a (N, T) array."""
    offsets = np.asarray(starts)[:, None] + np.arange(length)[None, :]
    if offsets.size and offsets.max() >= values.shape[1]:
        msg = f"window of length {length} at start {int(np.max(starts))} exceeds {values.shape[1]} points"
        raise CoverageError(msg)
    return values[np.asarray(series)[:, None], offsets]


def feature_windows(features: np.ndarray, starts: np.ndarray, length: int) -> np.ndarray:
    """(batch, D_time, length) slices of a (D_time, T) covariate matrix."""
    offsets = np.asarray(starts)[:, None] + np.arange(length)[None, :]
    if offsets.size and offsets.max() >= features.shape[1]:
        msg = f"time features cover {features.shape[1]} points, window needs {offsets.max() + 1}"
        raise CoverageError(msg)
    return np.transpose(features[:, offsets], (1, 0, 2))


def history(
    values: np.ndarray,
    mask: np.ndarray | None,
    series: np.ndarray,
    starts: np.ndarray,
    length: int,
) -> np.ndarray:
    """
    (batch, length) values preceding each start, NaN where unobserved or
    before the beginning of the panel.
    """
    out = np.full((len(series), length), np.nan)
    for row, (i, t) in enumerate(zip(series, starts, strict=True)):
        lo = max(0, int(t) - length)
        segment = values[i, lo:t].astype(np.float64)
        if mask is not None:
            segment = np.where(mask[i, lo:t], segment, np.nan)
        out[row, length - (t - lo) :] = segment
    return out
