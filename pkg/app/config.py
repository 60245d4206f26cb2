from pathlib import Path
from typing import Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings

from app.errors import ConfigError

__all__ = ["RunConfig", "Settings", "load_run_config", "parse_assignments", "settings"]


class Settings(BaseSettings):
    outputs_dir: str = "outputs"
    log_level: str = "INFO"

    # Worker pool for evaluation runs and Context-FID draws
    eval_workers: int = 4

    # Storage configuration
    storage_type: Literal["local", "s3"] = "local"
    s3_bucket: str | None = None
    s3_endpoint_url: str | None = None  # For Cloudflare R2 / MinIO
    s3_access_key: str | None = None
    s3_secret_key: str | None = None

    model_config = {"env_file": ".env", "extra": "ignore"}

    @model_validator(mode="after")
    def validate_s3_bucket(self):
        """Fail fast if S3 storage is selected without a bucket."""
        if self.storage_type == "s3" and not self.s3_bucket:
            msg = "S3_BUCKET is required when STORAGE_TYPE=s3"
            raise ValueError(msg)
        return self


settings = Settings()


STRETCH_LENGTHS = (50, 110)
COLD_START_FRACTIONS = (0.1, 0.2, 0.3)

ScenarioKind = Literal["far_forecast", "stretch", "cold_start", "augmentation"]


class RunConfig(BaseModel):
    """
    Flat key=value run file shared by every command.

    Keys not listed here are rejected. List-valued keys accept comma-separated
    strings, e.g. ``eval_seeds=0,1,2``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Dataset
    dataset_path: str | None = None
    dataset_format: Literal["csv", "jsonlines"] = "jsonlines"
    synthetic_series: int = Field(20, gt=0)
    synthetic_length: int = Field(2000, gt=0)
    synthetic_noise: float = Field(0.1, ge=0)
    split_timestamp: str | None = None
    test_length: int = Field(224, ge=0)
    per_series_scaling: bool = False

    # Architecture and training
    target_length: int = 64
    channels: int = Field(32, gt=0)
    epochs: int | None = Field(None, gt=0)
    batches_per_epoch: int = Field(100, gt=0)
    batch_size: int = Field(512, gt=0)
    stage_epochs: int = Field(1000, gt=0)
    fade_epochs: int = Field(500, gt=0)
    lr: float = Field(5e-4, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    moment_loss_weight: float = Field(1.0, ge=0)
    self_attention: bool = True
    fade_in: bool = True
    moment_loss: bool = True
    context_length: int = Field(0, ge=0)

    # Context-FID encoder and scoring
    encoder_depth: int = Field(4, gt=0)
    encoder_channels: int = Field(32, gt=0)
    encoder_dim: int = Field(32, gt=0)
    encoder_kernel: int = Field(3, gt=1)
    encoder_negatives: int = Field(4, gt=0)
    encoder_steps: int = Field(300, gt=0)
    encoder_batch: int = Field(64, gt=0)
    encoder_lr: float = Field(1e-3, gt=0)
    encoder_checkpoint: str | None = None
    train_encoder: bool = False
    n_windows: int = Field(5120, gt=1)
    fid_draws: int = Field(5, gt=0)

    # Scenarios and evaluation
    scenario_kind: ScenarioKind = "far_forecast"
    stretch_length: int = 50
    cold_start_fraction: float = 0.1
    forecast_window: int = Field(32, gt=0)
    forecast_windows: int = Field(7, gt=0)
    scenario: str | None = None
    imputer: Literal["gan", "moving_average"] = "gan"
    eval_checkpoints: list[str] = Field(default_factory=list)
    eval_baselines: list[str] = Field(default_factory=lambda: ["moving_average", "mean"])
    eval_seeds: list[int] = Field(default_factory=lambda: [0])
    n_samples: int = Field(100, gt=0)

    # Artifacts
    checkpoint: str | None = None
    samples: str | None = None
    seed: int = 0
    output_dir: str | None = None

    @field_validator("eval_checkpoints", "eval_baselines", "eval_seeds", mode="before")
    @classmethod
    def split_commas(cls, value):
        if value is None:
            return []
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("target_length")
    @classmethod
    def validate_target_length(cls, value: int) -> int:
        if value < 16 or value > 256 or value & (value - 1):  # noqa: PLR2004
            msg = f"target_length must be 2^(L+3) with L in [1, 5], got {value}"
            raise ValueError(msg)
        return value

    @field_validator("stretch_length")
    @classmethod
    def validate_stretch_length(cls, value: int) -> int:
        if value not in STRETCH_LENGTHS:
            msg = f"stretch_length must be one of {STRETCH_LENGTHS}, got {value}"
            raise ValueError(msg)
        return value

    @field_validator("cold_start_fraction")
    @classmethod
    def validate_cold_start_fraction(cls, value: float) -> float:
        if not any(abs(value - f) < 1e-9 for f in COLD_START_FRACTIONS):
            msg = f"cold_start_fraction must be one of {COLD_START_FRACTIONS}, got {value}"
            raise ValueError(msg)
        return value

    @model_validator(mode="after")
    def validate_schedule(self):
        if self.fade_epochs > self.stage_epochs:
            msg = (
                f"fade_epochs ({self.fade_epochs}) must not exceed "
                f"stage_epochs ({self.stage_epochs})"
            )
            raise ValueError(msg)
        return self

    def echo(self) -> dict:
        """Every field with its effective value, for manifests."""
        return self.model_dump(mode="json")


def parse_assignments(lines: list[str], source: str) -> dict[str, str | None]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values: dict[str, str | None] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            msg = f"{source}:{number}: expected key=value, got {raw.strip()!r}"
            raise ConfigError(msg)
        value = value.strip()
        values[key.strip()] = None if value.lower() in {"", "none", "null"} else value
    return values


def load_run_config(path: Path | None = None, overrides: list[str] | None = None) -> RunConfig:
    """
    Build a RunConfig from an optional key=value file plus ``--set`` overrides.

    Later keys win; overrides are applied last. Validation failures become a
    ConfigError listing each offending field.
    """
    values: dict[str, str | None] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            msg = f"cannot read config {path}: {e}"
            raise ConfigError(msg) from e
        values.update(parse_assignments(text.splitlines(), str(path)))
    values.update(parse_assignments(overrides or [], "--set"))

    try:
        return RunConfig(**values)
    except ValidationError as e:
        fields = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in e.errors()
        )
        msg = f"invalid run config: {fields}"
        raise ConfigError(msg) from e
