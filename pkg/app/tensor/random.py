"""Seeded, splittable random streams."""

import zlib

import numpy as np

__all__ = ["make_rng", "stream_key"]


def stream_key(*keys: object) -> list[int]:
    """Stable 32-bit words identifying a component stream."""
    return [zlib.crc32(str(key).encode("utf-8")) for key in keys]


def make_rng(seed: int, *keys: object) -> np.random.Generator:
    """
    PCG64 generator for a named component under a run seed.

    The same (seed, keys) always yields the same stream, and distinct keys give
    statistically independent streams, e.g. ``make_rng(7, "generator", 2)``.
    """
    entropy = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF, *stream_key(*keys)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
