"""Bottleneck extraction: run a headless backbone over a manifest of images."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigurationError
from .fmx import write_fmx
from .images import load_batch, read_manifest
from .zoo import NORMALIZATION, load_backbone

MODES = ("BN", "FT")


@dataclass(frozen=True)
class ExtractorConfig:
    model: str
    mode: str = "BN"
    input_size: int | None = None
    batch_size: int = 16
    epochs: int = 2
    learning_rate: float = 3e-4
    momentum: float = 0.9
    shuffle: bool = True
    seed: int = 0
    fetch_weights: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be BN or FT, got {self.mode!r}")
        if self.input_size is not None and self.input_size < 32:
            raise ConfigurationError(
                f"input_size must be at least 32, got {self.input_size}"
            )
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be non-negative, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigurationError(
                f"learning_rate must be positive, got {self.learning_rate}"
            )
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(
                f"momentum must lie in [0, 1), got {self.momentum}"
            )


def extract_features(backbone, rows, input_size: int, batch_size: int) -> np.ndarray:
    """Forward every manifest row through the backbone, preserving row order."""
    chunks = []
    with torch.no_grad():
        for start in range(0, len(rows), batch_size):
            batch = load_batch(rows[start : start + batch_size], input_size)
            out = backbone(batch)
            chunks.append(np.ascontiguousarray(out.cpu().numpy(), dtype=np.float32))
    return np.vstack(chunks)


def run_extraction(manifest_path, out_path, cfg: ExtractorConfig) -> dict:
    """Extract features per the config and write the FMX pair.

    Returns the provenance dictionary that was recorded in the sidecar.
    """
    rows = read_manifest(manifest_path)
    backbone, entry, provenance = load_backbone(cfg.model, cfg.fetch_weights)
    input_size = cfg.input_size or entry.input_size
    labels = tuple(r.label for r in rows) if all(r.label for r in rows) else None
    if cfg.mode == "FT":
        if labels is None:
            raise ConfigurationError(
                "FT mode needs a label for every manifest row; BN needs none"
            )
        from .finetune import fine_tune

        backbone, training = fine_tune(backbone, entry.feature_dim, rows, input_size, cfg)
        provenance["fine_tuning"] = training
        provenance["state_dict_sha256"] = _tuned_hash(backbone)
    features = extract_features(backbone, rows, input_size, cfg.batch_size)
    provenance.update(
        mode=cfg.mode,
        preprocessing={
            "resize": "bilinear",
            "input_size": input_size,
            "scale": "1/255",
            "normalization": NORMALIZATION,
        },
        batch_size=cfg.batch_size,
        n_images=len(rows),
    )
    write_fmx(
        Path(out_path),
        features,
        [r.sample_id for r in rows],
        labels=labels,
        source=f"deepextract({provenance['model']},{cfg.mode})",
        extraction=provenance,
    )
    return provenance


def _tuned_hash(backbone) -> str:
    from .zoo import state_dict_sha256

    return state_dict_sha256(backbone)
