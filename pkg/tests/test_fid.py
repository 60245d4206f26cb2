"""Tests for Gaussian statistics, the Fréchet distance and Context-FID."""

import numpy as np
import pytest

from app.data.windows import admissible_starts, value_windows
from app.errors import ConfigError, ContractError, DimensionError, NumericError
from app.fid import CausalEncoder, EncoderConfig
from app.fid.score import GaussianStats, context_fid, context_fid_at, frechet_distance, gaussian_stats

SMALL = EncoderConfig(depth=2, channels=4, dim=4, seed=0)


def test_gaussian_stats_example():
    """{(0, 0), (2, 0)} has mean (1, 0) and covariance diag(2, 0)."""
    stats = gaussian_stats(np.array([[0.0, 0.0], [2.0, 0.0]]))

    np.testing.assert_allclose(stats.mean, [1.0, 0.0])
    np.testing.assert_allclose(stats.cov, [[2.0, 0.0], [0.0, 0.0]])


def test_gaussian_stats_needs_two_points():
    """A single embedding has no covariance."""
    with pytest.raises(ContractError):
        gaussian_stats(np.zeros((1, 3)))


@pytest.mark.parametrize(
    ("mean_b", "var_b"),
    [(1.0, 1.0), (0.0, 4.0)],
)
def test_one_dimensional_closed_form(mean_b, var_b):
    """(μa − μb)² + (σa − σb)² in one dimension."""
    a = GaussianStats(np.array([0.0]), np.array([[1.0]]))
    b = GaussianStats(np.array([mean_b]), np.array([[var_b]]))

    assert frechet_distance(a, b) == pytest.approx(1.0)


def test_distance_is_symmetric(rng):
    """FD(a, b) == FD(b, a)."""
    a = gaussian_stats(rng.normal(size=(200, 5)))
    b = gaussian_stats(rng.normal(loc=0.3, scale=1.5, size=(200, 5)))

    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-8)


def test_self_distance_is_zero(rng):
    """Identical statistics are at distance 0 and never negative."""
    stats = gaussian_stats(rng.normal(size=(64, 6)))

    assert frechet_distance(stats, stats) == pytest.approx(0.0, abs=1e-8)


def test_independent_draws_are_close(rng):
    """Two n=4096 samples of the same 8-d Gaussian are within 0.05."""
    a = gaussian_stats(rng.normal(size=(4096, 8)))
    b = gaussian_stats(rng.normal(size=(4096, 8)))

    assert frechet_distance(a, b) < 0.05  # noqa: PLR2004


def test_dimension_mismatch():
    """Embeddings of different width cannot be compared."""
    with pytest.raises(DimensionError):
        frechet_distance(
            GaussianStats(np.zeros(2), np.eye(2)), GaussianStats(np.zeros(3), np.eye(3))
        )


def test_non_psd_covariance():
    """Negative eigenvalues beyond tolerance are numeric errors."""
    bad = GaussianStats(np.zeros(1), np.array([[-1.0]]))
    with pytest.raises(NumericError):
        frechet_distance(bad, GaussianStats(np.zeros(1), np.eye(1)))


def test_context_fid_zero_for_identical_windows(rng):
    """Scoring real windows against themselves gives 0."""
    windows = rng.uniform(size=(50, 16))

    assert context_fid_at(CausalEncoder(SMALL), windows, windows) == pytest.approx(0.0, abs=1e-8)


def test_context_fid_requires_alignment(rng):
    """Real and synthetic batches must have equal shapes."""
    with pytest.raises(DimensionError):
        context_fid_at(CausalEncoder(SMALL), rng.uniform(size=(5, 16)), rng.uniform(size=(6, 16)))


def test_context_fid_draws(rng):
    """Draws are aligned, seeded and reported with their spread."""
    values = rng.uniform(size=(3, 120))
    pool = admissible_starts(None, 3, 120, 16)
    encoder = CausalEncoder(SMALL)
    seen = []

    def echo(series, starts, draw_rng):
        seen.append((series.copy(), starts.copy()))
        return value_windows(values, series, starts, 16)

    report = context_fid(encoder, values, echo, pool, n_windows=40, window_length=16, seed=3, draws=3)

    assert len(report.scores) == 3  # noqa: PLR2004
    assert report.mean == pytest.approx(0.0, abs=1e-8)
    assert report.to_dict()["n_windows"] == 40  # noqa: PLR2004
    assert all(len(set(zip(s, t, strict=True))) == 40 for s, t in seen)  # noqa: PLR2004
    again = context_fid(encoder, values, lambda s, t, r: value_windows(values, s, t, 16) + 0.1, pool, 40, 16, seed=3, draws=3)
    assert again.mean > 0.0


def test_context_fid_needs_enough_windows(rng):
    """Requesting more windows than the pool holds is a config error."""
    pool = admissible_starts(None, 1, 20, 16)
    with pytest.raises(ConfigError):
        context_fid(CausalEncoder(SMALL), rng.uniform(size=(1, 20)), lambda s, t, r: None, pool, 10, 16)
