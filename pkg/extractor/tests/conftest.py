"""Shared fixture: a 20-image manifest with known structure.

Image 0 is constant black and image 1 constant white; images 3 and 7 are
byte-identical copies of the same pattern under different sample ids; the
rest are seeded random patterns.  Labels alternate between two classes.
"""
import csv
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from deepextract import ExtractorConfig, load_backbone

N_IMAGES = 20
TEST_INPUT_SIZE = 64
TEST_MODEL = "mobilenetv2"


def _pattern(index: int) -> np.ndarray:
    if index == 0:
        return np.zeros((48, 48, 3), dtype=np.uint8)
    if index == 1:
        return np.full((48, 48, 3), 255, dtype=np.uint8)
    source = 3 if index == 7 else index
    rng = np.random.default_rng(np.random.SeedSequence([97, source]))
    return rng.integers(0, 256, size=(48, 48, 3), dtype=np.uint8)


def build_image_dir(directory: Path, with_labels: bool = True) -> Path:
    """Write the PNGs and manifest into ``directory``; returns the manifest path."""
    directory.mkdir(parents=True, exist_ok=True)
    manifest = directory / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "path", "label"] if with_labels else ["sample_id", "path"]
        )
        for i in range(N_IMAGES):
            name = f"img{i:03d}.png"
            Image.fromarray(_pattern(i), mode="RGB").save(directory / name)
            label = "epidermal" if i % 2 == 0 else "melanocytic"
            row = [f"img{i:03d}", name]
            if with_labels:
                row.append(label)
            writer.writerow(row)
    return manifest


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("images")
    build_image_dir(directory)
    return directory


@pytest.fixture(scope="session")
def manifest_path(image_dir):
    return image_dir / "manifest.csv"


@pytest.fixture(scope="session")
def backbone():
    model, entry, provenance = load_backbone(TEST_MODEL, fetch_weights=False)
    return model, entry, provenance


def make_config(**overrides) -> ExtractorConfig:
    merged = {
        "model": TEST_MODEL,
        "input_size": TEST_INPUT_SIZE,
        "batch_size": 8,
        "fetch_weights": False,
    }
    merged.update(overrides)
    return ExtractorConfig(**merged)
