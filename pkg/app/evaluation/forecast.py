"""Point forecasts from a generator and from the unconditional-mean baseline."""

import logging
from dataclasses import dataclass

import numpy as np

from app.errors import ContractError
from app.gan.sampling import GanSampler
from app.tensor import make_rng

__all__ = ["HORIZON", "ForecastRequest", "gan_forecast", "mean_forecast"]

logger = logging.getLogger(__name__)

HORIZON = 32


@dataclass
class ForecastRequest:
    """
    Forecast of `horizon` points of one series from `start` on.

    `context` holds the raw values strictly preceding `start` (NaN where
    unobserved); only models with a context block read it.
    """

    series: int
    start: int
    horizon: int = HORIZON
    context: np.ndarray | None = None


def gan_forecast(
    sampler: GanSampler, request: ForecastRequest, n_samples: int = 100, seed: int = 0
) -> np.ndarray:
    """
    Per-step mean of `n_samples` windows generated at (series, start).

    Windows start at the forecast start, so the forecast is their first
    `horizon` points, in raw units.
    """
    if sampler.target_length < request.horizon:
        msg = f"generator window {sampler.target_length} is shorter than the horizon {request.horizon}"
        raise ContractError(msg)
    context = None
    if sampler.context_length:
        if request.context is None:
            msg = "this generator needs the preceding values as context"
            raise ContractError(msg)
        context = np.repeat(np.atleast_2d(request.context), n_samples, axis=0)
    rng = make_rng(seed, "forecast", request.series, request.start)
    samples = sampler.sample(
        np.full(n_samples, request.series),
        np.full(n_samples, request.start),
        rng,
        context,
    )
    return samples[:, : request.horizon].mean(axis=0)


def mean_forecast(
    values: np.ndarray, observed: np.ndarray, request: ForecastRequest
) -> np.ndarray:
    """Mean of the series' observed values before the start, repeated over the horizon."""
    row = values[request.series, : request.start]
    seen = observed[request.series, : request.start]
    level = row[seen].mean() if seen.any() else values[observed].mean()
    return np.full(request.horizon, level)
