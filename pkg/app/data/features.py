"""Calendar and age covariates for hourly series."""

import numpy as np
import pandas as pd

from app.data.panel import FREQ

__all__ = ["TIME_FEATURE_NAMES", "time_features"]

TIME_FEATURE_NAMES = ("hour_of_day", "day_of_week", "day_of_month", "day_of_year", "age")


def time_features(start, length: int) -> np.ndarray:
    """
    (5, length) covariate matrix for hourly stamps beginning at `start`.

    Calendar rows map index / (cardinality - 1) - 0.5 onto [-0.5, 0.5] with
    Monday as weekday 0 and days of month/year shifted to 0-based. The last
    row is age = log(2 + t) for 0-based t.
    """
    stamps = pd.date_range(pd.Timestamp(start), periods=length, freq=FREQ)
    t = np.arange(length, dtype=np.float64)
    return np.vstack(
        [
            stamps.hour.to_numpy() / 23.0 - 0.5,
            stamps.dayofweek.to_numpy() / 6.0 - 0.5,
            (stamps.day.to_numpy() - 1) / 30.0 - 0.5,
            (stamps.dayofyear.to_numpy() - 1) / 365.0 - 0.5,
            np.log(2.0 + t),
        ]
    ).astype(np.float64)
