"""FMX writer and reader.

The wire format is the downstream fusion pipeline's interchange format:
4-byte magic ``FMX1``, two little-endian u32 (rows, columns), then the
row-major little-endian float32 payload.  A sidecar ``<name>.json`` next
to the binary carries ``sample_ids``, optional ``labels``, a ``source``
string, and ``split_point`` (always null here; extraction never fuses).
An extra ``extraction`` object records provenance; downstream readers
ignore keys they do not know.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"FMX1"
_HEADER = struct.Struct("<II")


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_fmx(path, data, sample_ids, labels=None, source="", extraction=None):
    """Write the binary matrix and its sidecar; round-trips bit-exactly."""
    path = Path(path)
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise FormatError(f"feature data must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError("feature data holds non-finite entries")
    sample_ids = [str(s) for s in sample_ids]
    if len(sample_ids) != arr.shape[0]:
        raise FormatError(f"{len(sample_ids)} sample ids for {arr.shape[0]} rows")
    if labels is not None and len(labels) != arr.shape[0]:
        raise FormatError(f"{len(labels)} labels for {arr.shape[0]} rows")
    n, d = arr.shape
    path.write_bytes(MAGIC + _HEADER.pack(n, d) + arr.astype("<f4", copy=False).tobytes("C"))
    doc = {
        "sample_ids": sample_ids,
        "labels": list(labels) if labels is not None else None,
        "source": source,
        "split_point": None,
    }
    if extraction is not None:
        doc["extraction"] = extraction
    sidecar_path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_fmx(path):
    """Read a matrix back; returns ``(data, sample_ids, labels, sidecar_doc)``."""
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
            f"{path}: payload size mismatch (header says {n}x{d}, file holds "
            f"{len(blob)} bytes, expected {expect})"
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
    if labels is not None and (not isinstance(labels, list) or len(labels) != n):
        raise FormatError(f"{side}: labels must be null or list {n} entries")
    return data, tuple(ids), tuple(labels) if labels is not None else None, doc
