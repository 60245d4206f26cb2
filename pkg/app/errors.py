"""Exception hierarchy shared by every module."""


class PsaGanError(Exception):
    """Base class for all library errors."""


class DimensionError(PsaGanError, ValueError):
    """Tensor shapes do not agree."""


class ContractError(PsaGanError, ValueError):
    """A documented precondition was violated by the caller."""


class ConfigError(PsaGanError, ValueError):
    """Invalid run or component configuration."""


class IngestionError(PsaGanError, ValueError):
    """Input dataset is malformed (gaps, duplicates, unparsable values)."""


class DegenerateSeriesError(PsaGanError, ValueError):
    """Scaling is undefined because max equals min."""


class NumericError(PsaGanError, ArithmeticError):
    """Non-finite values or numerically invalid matrices."""


class UndefinedMetricError(NumericError):
    """A metric normalizer is zero."""


class CoverageError(PsaGanError):
    """A gap cannot be covered by any admissible generation window."""


class MissingArtifactError(PsaGanError, FileNotFoundError):
    """A required artifact (checkpoint, encoder, manifest) does not exist."""


class MissingEncoderError(MissingArtifactError):
    """Scoring requested without a trained encoder."""


class MissingDependencyError(MissingArtifactError):
    """A run references outputs of another run that are not present."""
