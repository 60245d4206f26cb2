"""Fréchet distance between Gaussian fits of real and synthetic window embeddings."""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from app.data.windows import value_windows
from app.errors import ConfigError, ContractError, DimensionError, NumericError
from app.fid.encoder import CausalEncoder, embed
from app.tensor import make_rng

__all__ = [
    "EIGEN_TOLERANCE",
    "FidReport",
    "GaussianStats",
    "context_fid",
    "context_fid_at",
    "frechet_distance",
    "gaussian_stats",
]

logger = logging.getLogger(__name__)

EIGEN_TOLERANCE = 1e-6

SyntheticFn = Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def gaussian_stats(embeddings: np.ndarray) -> GaussianStats:
    """Sample mean and symmetrised (n−1)-normalised covariance, in float64."""
    x = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    if x.shape[0] < 2:  # noqa: PLR2004
        msg = f"need at least 2 embeddings for a covariance, got {x.shape[0]}"
        raise ContractError(msg)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    return GaussianStats(mean=x.mean(axis=0), cov=0.5 * (cov + cov.T))


def _checked_eigenvalues(matrix: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    values, vectors = linalg.eigh(0.5 * (matrix + matrix.T))
    if values.size and values.min() < -EIGEN_TOLERANCE:
        msg = f"{what} is not positive semi-definite: eigenvalues {values[values < 0].tolist()}"
        raise NumericError(msg)
    return np.clip(values, 0.0, None), vectors


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """
    ‖μa − μb‖² + Tr(Σa + Σb − 2(Σa Σb)^½).

    The trace of the square root is taken from the eigenvalues of
    Σa^½ Σb Σa^½, which share the spectrum of Σa Σb but are symmetric.
    """
    if a.dim != b.dim:
        msg = f"embedding dimensions differ: {a.dim} vs {b.dim}"
        raise DimensionError(msg)
    values, vectors = _checked_eigenvalues(a.cov, "first covariance")
    root_a = (vectors * np.sqrt(values)) @ vectors.T
    product, _ = _checked_eigenvalues(root_a @ b.cov @ root_a, "covariance product")
    diff = a.mean - b.mean
    distance = diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.sqrt(product).sum()
    return max(0.0, float(distance))


@dataclass
class FidReport:
    """Context-FID over several seeded window draws."""

    mean: float
    std: float
    scores: list[float]
    n_windows: int
    window_length: int
    seed: int
    draws: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "context_fid_mean": self.mean,
            "context_fid_std": self.std,
            "scores": self.scores,
            "n_windows": self.n_windows,
            "window_length": self.window_length,
            "seed": self.seed,
            "draws": self.draws,
        }


def context_fid_at(
    encoder: CausalEncoder, real_windows: np.ndarray, synthetic_windows: np.ndarray
) -> float:
    """Context-FID of two aligned window batches."""
    real_windows = np.asarray(real_windows)
    synthetic_windows = np.asarray(synthetic_windows)
    if real_windows.shape != synthetic_windows.shape:
        msg = f"real windows {real_windows.shape} and synthetic windows {synthetic_windows.shape} are not aligned"
        raise DimensionError(msg)
    return frechet_distance(
        gaussian_stats(embed(encoder, real_windows)),
        gaussian_stats(embed(encoder, synthetic_windows)),
    )


def context_fid(
    encoder: CausalEncoder,
    values: np.ndarray,
    synthetic_fn: SyntheticFn,
    pool: tuple[np.ndarray, np.ndarray],
    n_windows: int,
    window_length: int,
    seed: int = 0,
    draws: int = 5,
    workers: int = 1,
) -> FidReport:
    """
    Mean and std of Context-FID over `draws` seeded draws.

    Each draw picks `n_windows` distinct (series, start) pairs from `pool`,
    slices the real windows from the scaled `values` and asks `synthetic_fn`
    for windows at exactly the same pairs.
    """
    series_pool, starts_pool = pool
    if len(series_pool) < n_windows:
        msg = f"only {len(series_pool)} admissible windows of length {window_length}, {n_windows} requested"
        raise ConfigError(msg)

    def score(draw: int) -> float:
        rng = make_rng(seed, "fid", draw)
        pick = rng.choice(len(series_pool), size=n_windows, replace=False)
        series, starts = series_pool[pick], starts_pool[pick]
        real = value_windows(values, series, starts, window_length)
        synthetic = synthetic_fn(series, starts, make_rng(seed, "fid", "synthetic", draw))
        result = context_fid_at(encoder, real, synthetic)
        logger.info(f"Context-FID draw {draw}: {result:.6f}")
        return result

    indices = list(range(draws))
    if workers > 1 and draws > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            scores = list(executor.map(score, indices))
    else:
        scores = [score(d) for d in indices]
    return FidReport(
        mean=float(np.mean(scores)),
        std=float(np.std(scores)),
        scores=scores,
        n_windows=n_windows,
        window_length=window_length,
        seed=seed,
        draws=indices,
    )
