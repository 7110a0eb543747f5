"""Exception types shared across the package."""


class MetafuseError(Exception):
    """Base class for all package errors."""


class SchemaError(MetafuseError):
    """Metadata column declarations and observed values disagree."""


class EncodingError(MetafuseError):
    """A record cannot be encoded under its schema."""


class FormatError(MetafuseError):
    """A serialized artifact is malformed (bad magic, truncation, bad sidecar)."""


class StoreError(MetafuseError):
    """A feature store is inconsistent or a requested id is absent."""


class AlignmentError(MetafuseError):
    """Sample ids of two matrices cannot be aligned."""


class FusionError(MetafuseError):
    """Fusion preconditions violated (for example, zero-width metadata)."""


class ParameterError(MetafuseError):
    """A configuration or analysis parameter is out of its valid domain."""


class InputError(MetafuseError):
    """Input data violates a precondition (shape, length, value range)."""


class TrainingError(MetafuseError):
    """Training preconditions violated (for example, a class with no samples)."""


class DivergenceError(MetafuseError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class SplitError(MetafuseError):
    """Dataset indexing or splitting failed."""


class ConfigError(MetafuseError):
    """An experiment configuration is invalid."""


class StageError(MetafuseError):
    """A pipeline stage failed; carries the stage name for exit-code mapping."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
