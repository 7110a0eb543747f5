"""Feature matrices, the FMX on-disk format, fusion, and a directory store.

FMX layout: 4-byte magic ``FMX1``, two little-endian u32 (rows N, columns d),
then ``N*d`` little-endian float32 values in row-major order.  A sidecar
``<name>.fmx.json`` carries ``sample_ids``, optional ``labels``, a ``source``
string, and ``split_point`` (null unless the matrix is a fusion product).
"""
from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import AlignmentError, FormatError, FusionError, InputError, StoreError

MAGIC = b"FMX1"
_HEADER = struct.Struct("<II")


def _as_feature_array(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise InputError(f"feature data must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.count_nonzero(~np.isfinite(arr)))
        raise InputError(f"feature data holds {bad} non-finite entries")
    return arr


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-aligned features: ``data[i]`` belongs to ``sample_ids[i]``."""

    data: np.ndarray
    sample_ids: tuple
    labels: tuple | None = None
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "data", _as_feature_array(self.data))
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        if len(self.sample_ids) != self.data.shape[0]:
            raise FormatError(
                f"{len(self.sample_ids)} sample ids for {self.data.shape[0]} rows"
            )
        if len(set(self.sample_ids)) != len(self.sample_ids):
            dupes = [s for s, c in Counter(self.sample_ids).items() if c > 1]
            raise AlignmentError(f"duplicate sample ids: {sorted(dupes)[:10]}")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != self.data.shape[0]:
                raise FormatError(
                    f"{len(self.labels)} labels for {self.data.shape[0]} rows"
                )

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def rows_for(self, ids) -> "FeatureMatrix":
        index = {s: i for i, s in enumerate(self.sample_ids)}
        missing = [s for s in ids if s not in index]
        if missing:
            raise StoreError(f"unknown sample ids: {missing[:10]}")
        take = [index[s] for s in ids]
        labels = tuple(self.labels[i] for i in take) if self.labels else None
        return FeatureMatrix(self.data[take], tuple(ids), labels, self.source)


@dataclass(frozen=True)
class FusedMatrix(FeatureMatrix):
    """A fusion product; columns ``[:split_point]`` are the image block."""

    split_point: int = 0

    def image_block(self) -> np.ndarray:
        return self.data[:, : self.split_point]

    def metadata_block(self) -> np.ndarray:
        return self.data[:, self.split_point :]


def fuse(images: FeatureMatrix, metadata: FeatureMatrix) -> FusedMatrix:
    """Concatenate metadata columns onto image features, row-aligned by id.

    Metadata rows are reordered to the image matrix's sample order.  The image
    matrix's labels and row order are preserved.
    """
    if metadata.width == 0:
        raise FusionError("metadata matrix has zero columns; nothing to fuse")
    img_ids = Counter(images.sample_ids)
    md_ids = Counter(metadata.sample_ids)
    if img_ids != md_ids:
        missing_md = sorted(set(images.sample_ids) - set(metadata.sample_ids))
        missing_img = sorted(set(metadata.sample_ids) - set(images.sample_ids))
        raise AlignmentError(
            "sample ids disagree: "
            f"missing from metadata {missing_md[:10]}, "
            f"missing from images {missing_img[:10]}"
        )
    md_aligned = metadata.rows_for(list(images.sample_ids))
    fusedata = np.concatenate([images.data, md_aligned.data], axis=1)
    source = f"fused({images.source or 'images'}+{metadata.source or 'metadata'})"
    return FusedMatrix(
        data=fusedata,
        sample_ids=images.sample_ids,
        labels=images.labels,
        source=source,
        split_point=images.width,
    )


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_fmx(matrix: FeatureMatrix, path) -> None:
    """Write ``<path>`` and ``<path>.json``; round-trips bit-exactly."""
    path = Path(path)
    arr = matrix.data  # float32, C-contiguous, finite (enforced on build)
    n, d = arr.shape
    payload = MAGIC + _HEADER.pack(n, d) + arr.astype("<f4", copy=False).tobytes("C")
    path.write_bytes(payload)
    doc = {
        "sample_ids": list(matrix.sample_ids),
        "labels": list(matrix.labels) if matrix.labels is not None else None,
        "source": matrix.source,
        "split_point": getattr(matrix, "split_point", None),
    }
    sidecar_path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_fmx(path) -> FeatureMatrix:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    n, d = _HEADER.unpack_from(blob, len(MAGIC))
    expect = len(MAGIC) + _HEADER.size + n * d * 4
    if len(blob) != expect:
        raise FormatError(
            f"{path}: payload size mismatch (header says {n}x{d}, "
            f"file holds {len(blob)} bytes, expected {expect})"
        )
    data = np.frombuffer(
        blob, dtype="<f4", count=n * d, offset=len(MAGIC) + _HEADER.size
    ).reshape(n, d).copy()
    side = sidecar_path(path)
    if not side.exists():
        raise FormatError(f"{path}: sidecar {side.name} is missing")
    doc = json.loads(side.read_text())
    ids = doc.get("sample_ids")
    if not isinstance(ids, list) or len(ids) != n:
        raise FormatError(f"{side}: sample_ids must list {n} entries")
    labels = doc.get("labels")
    labels = tuple(labels) if labels is not None else None
    split_point = doc.get("split_point")
    if split_point is None:
        return FeatureMatrix(data, tuple(ids), labels, doc.get("source", ""))
    return FusedMatrix(
        data, tuple(ids), labels, doc.get("source", ""),
        split_point=int(split_point),
    )


class FeatureStore:
    """Read-only view over every ``*.fmx`` file in a directory."""

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise StoreError(f"feature store directory {self.directory} not found")
        self._matrices = []
        self._index = {}
        width = None
        for f in sorted(self.directory.glob("*.fmx")):
            m = read_fmx(f)
            if width is None:
                width = m.width
            elif m.width != width:
                raise StoreError(
                    f"store width mismatch: {f.name} has {m.width} columns, "
                    f"expected {width}"
                )
            pos = len(self._matrices)
            self._matrices.append(m)
            for row, sid in enumerate(m.sample_ids):
                if sid in self._index:
                    raise StoreError(f"sample id '{sid}' appears in multiple files")
                self._index[sid] = (pos, row)
        if width is None:
            raise StoreError(f"no .fmx files under {self.directory}")
        self.width = width

    def get(self, ids) -> FeatureMatrix:
        """Return requested rows in request order."""
        ids = [str(s) for s in ids]
        rows = np.empty((len(ids), self.width), dtype=np.float32)
        for i, sid in enumerate(ids):
            if sid not in self._index:
                raise StoreError(f"sample id '{sid}' not in store")
            pos, row = self._index[sid]
            rows[i] = self._matrices[pos].data[row]
        return FeatureMatrix(rows, tuple(ids), None, f"store({self.directory.name})")


def provider_get(ids, directory) -> FeatureMatrix:
    """One-shot convenience wrapper over :class:`FeatureStore`."""
    return FeatureStore(directory).get(ids)
