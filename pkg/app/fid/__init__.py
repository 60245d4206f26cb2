"""Context-FID: contrastive window embeddings and their Fréchet distance."""

from app.fid.encoder import (
    CausalEncoder,
    EncoderConfig,
    embed,
    load_encoder,
    save_encoder,
    train_encoder,
)
from app.fid.samples import SampleSet, decode_samples, encode_samples
from app.fid.score import (
    FidReport,
    GaussianStats,
    context_fid,
    context_fid_at,
    frechet_distance,
    gaussian_stats,
)

__all__ = [
    "CausalEncoder",
    "EncoderConfig",
    "FidReport",
    "GaussianStats",
    "SampleSet",
    "context_fid",
    "context_fid_at",
    "decode_samples",
    "embed",
    "encode_samples",
    "frechet_distance",
    "gaussian_stats",
    "load_encoder",
    "save_encoder",
    "train_encoder",
]
