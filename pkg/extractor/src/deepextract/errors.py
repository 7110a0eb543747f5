"""Error hierarchy; every failure the package raises derives from ExtractorError."""


class ExtractorError(Exception):
    """Base class for all extraction failures."""


class ConfigurationError(ExtractorError):
    """Unknown model, bad mode, or invalid option combination."""


class ImageError(ExtractorError):
    """An input image is missing or cannot be decoded; the message names it."""


class FormatError(ExtractorError):
    """A serialized artifact (FMX file, sidecar, manifest) is malformed."""


class TrainingError(ExtractorError):
    """Fine-tuning failed, e.g. the loss diverged to a non-finite value."""
