"""Image manifest loading and tensor preprocessing.

A manifest is a CSV with header ``sample_id,path`` or
``sample_id,path,label``; relative paths resolve against the manifest's
directory.  Preprocessing decodes to RGB, resizes with bilinear
interpolation to the model's square input size, scales to [0, 1], and
normalizes with the zoo statistics.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import FormatError, ImageError
from .zoo import NORMALIZATION


@dataclass(frozen=True)
class ManifestRow:
    sample_id: str
    path: Path
    label: str | None


def read_manifest(path) -> list:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise FormatError(f"{path}: empty manifest")
            header = [h.strip() for h in header]
            if header[:2] != ["sample_id", "path"] or len(header) > 3 or (
                len(header) == 3 and header[2] != "label"
            ):
                raise FormatError(
                    f"{path}: header must be sample_id,path[,label], got {header}"
                )
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise FormatError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                image_path = Path(row[1])
                if not image_path.is_absolute():
                    image_path = path.parent / image_path
                label = row[2] if len(row) == 3 else None
                rows.append(ManifestRow(row[0], image_path, label))
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: manifest lists no images")
    ids = [r.sample_id for r in rows]
    if len(set(ids)) != len(ids):
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        raise FormatError(f"{path}: duplicate sample ids {dupes[:10]}")
    return rows


def load_image_tensor(path, input_size: int) -> torch.Tensor:
    """Decode one image to a normalized (3, S, S) float32 tensor."""
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB").resize(
                (input_size, input_size), Image.Resampling.BILINEAR
            )
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise ImageError(f"cannot decode image {path}: {exc}") from exc
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    mean = np.asarray(NORMALIZATION["mean"], dtype=np.float32)
    std = np.asarray(NORMALIZATION["std"], dtype=np.float32)
    arr = (arr - mean) / std
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))


def load_batch(rows, input_size: int) -> torch.Tensor:
    return torch.stack([load_image_tensor(r.path, input_size) for r in rows])
