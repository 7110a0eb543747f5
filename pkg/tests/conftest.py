"""Shared synthetic-data builders for the test suite."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from metafuse import FeatureMatrix, write_fmx


def make_suite(
    seed: int,
    n: int = 1000,
    k: int = 4,
    image_dim: int = 16,
    noise_meta: int = 3,
    sigma: float = 0.3,
    shuffle_metadata: bool = False,
):
    """Synthetic paired dataset: noise image block, one informative metadata column.

    The image block is isotropic Gaussian noise, so an image-only classifier
    is at chance.  The first metadata column equals the class index plus
    Gaussian noise of scale ``sigma``; the remaining metadata columns are
    noise.  ``shuffle_metadata`` permutes the informative column across
    samples, destroying its relation to the labels.

    Returns ``(image_matrix, metadata_matrix, y)``.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA3]))
    y = rng.integers(0, k, size=n)
    images = rng.normal(size=(n, image_dim))
    signal = y.astype(np.float64) + rng.normal(scale=sigma, size=n)
    if shuffle_metadata:
        signal = signal[rng.permutation(n)]
    noise = rng.normal(size=(n, noise_meta))
    metadata = np.column_stack([signal, noise])
    ids = tuple(f"s{i:04d}" for i in range(n))
    labels = tuple(f"c{v}" for v in y)
    image_matrix = FeatureMatrix(
        images.astype(np.float32), ids, labels, "synthetic-image"
    )
    metadata_matrix = FeatureMatrix(
        metadata.astype(np.float32), ids, None, "synthetic-metadata"
    )
    return image_matrix, metadata_matrix, y


def write_suite_files(directory: Path, seed: int, **suite_kwargs) -> Path:
    """Materialize a make_suite dataset as pipeline inputs; returns config path.

    Writes the image features as FMX, the metadata as CSV plus a declaration
    marking every column numeric, and a run config pointing at them.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    image_matrix, metadata_matrix, _ = make_suite(seed, **suite_kwargs)
    write_fmx(image_matrix, directory / "images.fmx")
    names = [f"m{j}" for j in range(metadata_matrix.width)]
    with open(directory / "metadata.csv", "w") as fh:
        fh.write("sample_id," + ",".join(names) + "\n")
        for sid, row in zip(metadata_matrix.sample_ids, metadata_matrix.data):
            fh.write(sid + "," + ",".join(repr(float(v)) for v in row) + "\n")
    (directory / "declaration.json").write_text(
        json.dumps({"columns": {name: "numeric" for name in names}})
    )
    config = {
        "features_fmx": str(directory / "images.fmx"),
        "metadata_table": str(directory / "metadata.csv"),
        "schema_declaration": str(directory / "declaration.json"),
        "out_dir": str(directory / "out"),
        "seed": seed,
    }
    (directory / "config.json").write_text(json.dumps(config, indent=2))
    return directory / "config.json"
