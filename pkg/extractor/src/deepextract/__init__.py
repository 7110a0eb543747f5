"""Pretrained-CNN feature extraction to the FMX interchange format.

Runs ImageNet-style architectures over image manifests and writes each
image's bottleneck feature vector (the activation entering the
classification layer) as one row of an FMX matrix, ready for the
downstream fusion pipeline.  BN mode extracts from the loaded weights;
FT mode first fine-tunes them on the manifest's labels.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    ExtractorError,
    FormatError,
    ImageError,
    TrainingError,
)
from .extract import ExtractorConfig, extract_features, run_extraction
from .finetune import fine_tune
from .fmx import read_fmx, write_fmx
from .images import ManifestRow, load_batch, load_image_tensor, read_manifest
from .zoo import (
    NORMALIZATION,
    REGISTRY,
    ZooEntry,
    available_models,
    load_backbone,
    resolve,
    state_dict_sha256,
)

__all__ = [
    "ConfigurationError",
    "ExtractorError",
    "ExtractorConfig",
    "FormatError",
    "ImageError",
    "ManifestRow",
    "NORMALIZATION",
    "REGISTRY",
    "TrainingError",
    "ZooEntry",
    "__version__",
    "available_models",
    "extract_features",
    "fine_tune",
    "load_backbone",
    "load_batch",
    "load_image_tensor",
    "read_fmx",
    "read_manifest",
    "resolve",
    "run_extraction",
    "state_dict_sha256",
    "write_fmx",
]
