"""Weight-block inspection for fused-feature models.

A fused model's per-class weight vector splits at the fusion point: the
first ``split_point`` weights act on image features, the rest on named
metadata features.  Summaries histogram each block with shared bin edges so
models of the same feature width compare directly.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import SoftmaxModel
from .errors import InputError

HISTOGRAM_BINS = 64


def shared_bin_edges(*weight_arrays, bins: int = HISTOGRAM_BINS) -> np.ndarray:
    """Uniform bin edges spanning the pooled min/max of all given arrays."""
    flat = [np.asarray(a, dtype=np.float64).ravel() for a in weight_arrays if np.asarray(a).size]
    if not flat:
        raise InputError("no weights given for bin pooling")
    pooled = np.concatenate(flat)
    lo = float(pooled.min())
    hi = float(pooled.max())
    if hi == lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, bins + 1)


def _block_summary(values: np.ndarray, edges: np.ndarray) -> dict:
    counts, _ = np.histogram(values, bins=edges)
    return {
        "min": float(values.min()),
        "max": float(values.max()),
        "mean": float(values.mean()),
        "std": float(values.std()),
        "histogram": counts.tolist(),
    }


@dataclass(frozen=True)
class WeightReport:
    class_names: tuple
    image_weights: np.ndarray  # (split_point, K)
    metadata_weights: np.ndarray  # (d - split_point, K)
    metadata_names: tuple
    bias: np.ndarray
    image_bin_edges: np.ndarray
    metadata_bin_edges: np.ndarray | None

    @property
    def split_point(self) -> int:
        return self.image_weights.shape[0]

    def summaries(self) -> dict:
        out = {}
        for j, cls in enumerate(self.class_names):
            entry = {"image": _block_summary(self.image_weights[:, j], self.image_bin_edges)}
            if self.metadata_weights.shape[0]:
                entry["metadata"] = _block_summary(
                    self.metadata_weights[:, j], self.metadata_bin_edges
                )
            out[cls] = entry
        return out

    def to_dict(self) -> dict:
        doc = {
            "class_names": list(self.class_names),
            "split_point": self.split_point,
            "metadata_names": list(self.metadata_names),
            "bias": [float(v) for v in self.bias],
            "image_bin_edges": [float(v) for v in self.image_bin_edges],
            "metadata_bin_edges": (
                [float(v) for v in self.metadata_bin_edges]
                if self.metadata_bin_edges is not None
                else None
            ),
            "summaries": self.summaries(),
            "metadata_weights": {
                cls: {
                    name: float(self.metadata_weights[i, j])
                    for i, name in enumerate(self.metadata_names)
                }
                for j, cls in enumerate(self.class_names)
            },
            "magnitude_ratio": magnitude_ratio(self),
        }
        return doc

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        """Per-feature weights, one row per (feature, class)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", "block", "class", "weight"])
            for j, cls in enumerate(self.class_names):
                for i in range(self.split_point):
                    w.writerow(
                        [f"image[{i}]", "image", cls, repr(float(self.image_weights[i, j]))]
                    )
                for i, name in enumerate(self.metadata_names):
                    w.writerow(
                        [name, "metadata", cls, repr(float(self.metadata_weights[i, j]))]
                    )


def split_weights(
    model: SoftmaxModel,
    split_point: int,
    metadata_names=None,
    image_bin_edges=None,
    metadata_bin_edges=None,
) -> WeightReport:
    """Split a model's weights into image and metadata blocks.

    ``split_point`` equal to the full width describes an image-only model
    (empty metadata block).  ``metadata_names``, when given, must name every
    trailing column; when omitted the columns are named ``meta[i]``.
    """
    d = model.n_features
    if not (0 < split_point <= d):
        raise InputError(f"split_point must lie in (0, {d}], got {split_point}")
    md_width = d - split_point
    if metadata_names is None:
        metadata_names = tuple(f"meta[{i}]" for i in range(md_width))
    else:
        metadata_names = tuple(metadata_names)
    if len(metadata_names) != md_width:
        raise InputError(
            f"{len(metadata_names)} metadata names for {md_width} metadata columns"
        )
    image_w = model.weights[:split_point]
    metadata_w = model.weights[split_point:]
    if image_bin_edges is None:
        image_bin_edges = shared_bin_edges(image_w)
    if metadata_bin_edges is None and md_width:
        metadata_bin_edges = shared_bin_edges(metadata_w)
    return WeightReport(
        class_names=model.class_names,
        image_weights=image_w.copy(),
        metadata_weights=metadata_w.copy(),
        metadata_names=metadata_names,
        bias=model.bias.copy(),
        image_bin_edges=np.asarray(image_bin_edges, dtype=np.float64),
        metadata_bin_edges=(
            np.asarray(metadata_bin_edges, dtype=np.float64)
            if metadata_bin_edges is not None
            else None
        ),
    )


def magnitude_ratio(report: WeightReport) -> list:
    """Per class: max |metadata weight| / max |image weight|.

    A zero image block makes the ratio infinite; it is reported as a flagged
    null so the JSON stays standard.
    """
    out = []
    for j, cls in enumerate(report.class_names):
        img_max = float(np.abs(report.image_weights[:, j]).max())
        if report.metadata_weights.shape[0] == 0:
            out.append({"class": cls, "ratio": None, "infinite": False})
            continue
        md_max = float(np.abs(report.metadata_weights[:, j]).max())
        if img_max == 0.0:
            out.append({"class": cls, "ratio": None, "infinite": True})
        else:
            out.append({"class": cls, "ratio": md_max / img_max, "infinite": False})
    return out
