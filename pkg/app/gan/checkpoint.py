"""
Binary checkpoint format shared by GAN and encoder models.

Layout (little-endian):

    b"PSAGANCK" | uint32 version | uint32 header_size | header (UTF-8 JSON) | payload

The header records the model kind, the config echo, growth stage, alpha,
free-form extras and one entry per array: name, shape, byte offset into the
payload. Every array is stored as '<f4', so round trips are bit-exact for
float32 models.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from app.errors import ContractError, MissingArtifactError
from app.gan.model import Discriminator, GanConfig, Generator
from app.storage import Storage

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "Checkpoint",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_gan",
    "read_checkpoint",
    "save_gan",
]

logger = logging.getLogger(__name__)

MAGIC = b"PSAGANCK"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sII")
_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    kind: str
    config: dict[str, Any]
    arrays: dict[str, np.ndarray]
    growth_stage: int = 1
    alpha: float = 1.0
    extra: dict[str, Any] = field(default_factory=dict)

    def section(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays under `prefix.`, with the prefix stripped."""
        cut = len(prefix) + 1
        return {k[cut:]: v for k, v in self.arrays.items() if k.startswith(prefix + ".")}


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, array in checkpoint.arrays.items():
        data = np.ascontiguousarray(array, dtype=_DTYPE).tobytes()
        entries.append({"name": name, "shape": list(np.shape(array)), "offset": offset})
        chunks.append(data)
        offset += len(data)
    header = json.dumps(
        {
            "kind": checkpoint.kind,
            "config": checkpoint.config,
            "growth_stage": checkpoint.growth_stage,
            "alpha": checkpoint.alpha,
            "extra": checkpoint.extra,
            "entries": entries,
        },
        sort_keys=True,
    ).encode("utf-8")
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)) + header + b"".join(chunks)


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < _PREAMBLE.size:
        msg = f"checkpoint truncated: {len(data)} bytes"
        raise ContractError(msg)
    magic, version, header_size = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        msg = f"not a checkpoint (magic {magic!r})"
        raise ContractError(msg)
    if version != FORMAT_VERSION:
        msg = f"unsupported checkpoint version {version}"
        raise ContractError(msg)
    start = _PREAMBLE.size
    header = json.loads(data[start : start + header_size].decode("utf-8"))
    payload = memoryview(data)[start + header_size :]

    arrays = {}
    for entry in header["entries"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        flat = np.frombuffer(payload, dtype=_DTYPE, count=count, offset=entry["offset"])
        arrays[entry["name"]] = flat.reshape(shape).astype(np.float32)
    return Checkpoint(
        kind=header["kind"],
        config=header["config"],
        arrays=arrays,
        growth_stage=header["growth_stage"],
        alpha=header["alpha"],
        extra=header["extra"],
    )


def read_checkpoint(storage: Storage, key: str) -> Checkpoint:
    data = storage.read_bytes(key)
    if data is None:
        msg = f"checkpoint not found: {key}"
        raise MissingArtifactError(msg)
    return decode_checkpoint(data)


def save_gan(
    storage: Storage,
    key: str,
    generator: Generator,
    discriminator: Discriminator,
    extra: dict[str, Any] | None = None,
) -> str:
    arrays = {f"generator.{k}": v for k, v in generator.state_dict().items()}
    arrays.update({f"discriminator.{k}": v for k, v in discriminator.state_dict().items()})
    checkpoint = Checkpoint(
        kind="gan",
        config=generator.config.model_dump(),
        arrays=arrays,
        growth_stage=generator.growth_stage,
        alpha=generator.alpha,
        extra=extra or {},
    )
    storage.save_bytes(key, encode_checkpoint(checkpoint))
    logger.info(f"Saved checkpoint {key} (stage {generator.growth_stage})")
    return key


def load_gan(
    storage: Storage, key: str
) -> tuple[Generator, Discriminator, Checkpoint]:
    """Rebuild both networks at the stored growth stage and load their weights."""
    checkpoint = read_checkpoint(storage, key)
    if checkpoint.kind != "gan":
        msg = f"{key} holds a {checkpoint.kind!r} checkpoint, expected 'gan'"
        raise ContractError(msg)
    config = GanConfig(**checkpoint.config)
    generator = Generator(config)
    discriminator = Discriminator(config)
    for _ in range(1, checkpoint.growth_stage):
        generator.add_stage()
        discriminator.add_stage()
    generator.load_state_dict(checkpoint.section("generator"))
    discriminator.load_state_dict(checkpoint.section("discriminator"))
    generator.alpha = discriminator.alpha = checkpoint.alpha
    return generator, discriminator, checkpoint
