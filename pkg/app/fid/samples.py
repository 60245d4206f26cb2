"""
Binary sample files.

Layout (little-endian): uint32 count | uint32 window length | count × (int32
series index, int64 start) | count × length float32 values.
"""

import struct
from dataclasses import dataclass

import numpy as np

from app.errors import ContractError

__all__ = ["SampleSet", "decode_samples", "encode_samples"]

_HEADER = struct.Struct("<II")
_PAIR = np.dtype([("series", "<i4"), ("start", "<i8")])
_VALUE = np.dtype("<f4")


@dataclass
class SampleSet:
    """Raw-unit synthetic windows with the (series, start) pairs they were drawn for."""

    series: np.ndarray
    starts: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.int64)
        self.starts = np.asarray(self.starts, dtype=np.int64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float32))
        if not len(self.series) == len(self.starts) == len(self.values):
            msg = (
                f"{len(self.series)} series indices, {len(self.starts)} starts "
                f"and {len(self.values)} windows do not match"
            )
            raise ContractError(msg)

    @property
    def window_length(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.series)


def encode_samples(samples: SampleSet) -> bytes:
    pairs = np.empty(len(samples), dtype=_PAIR)
    pairs["series"] = samples.series
    pairs["start"] = samples.starts
    return (
        _HEADER.pack(len(samples), samples.window_length)
        + pairs.tobytes()
        + np.ascontiguousarray(samples.values, dtype=_VALUE).tobytes()
    )


def decode_samples(data: bytes) -> SampleSet:
    if len(data) < _HEADER.size:
        msg = f"sample file truncated: {len(data)} bytes"
        raise ContractError(msg)
    count, length = _HEADER.unpack_from(data)
    expected = _HEADER.size + count * (_PAIR.itemsize + length * _VALUE.itemsize)
    if len(data) != expected:
        msg = f"sample file holds {len(data)} bytes, header implies {expected}"
        raise ContractError(msg)
    pairs = np.frombuffer(data, dtype=_PAIR, count=count, offset=_HEADER.size)
    values = np.frombuffer(
        data, dtype=_VALUE, count=count * length, offset=_HEADER.size + count * _PAIR.itemsize
    )
    return SampleSet(
        series=pairs["series"],
        starts=pairs["start"],
        values=values.reshape(count, length),
    )
