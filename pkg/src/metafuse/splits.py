"""Label mapping, unique-label filtering, and stratified splitting.

Raw diagnostic statements map onto super-classes through a data-file map;
samples whose mapped label set is not exactly one class can be filtered out.
Stratified splitting shuffles each class independently with a seeded
generator and apportions counts by largest remainder, so each subset's class
count differs from exact proportionality by less than one sample.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SplitError

SUBSET_NAMES = ("train", "val", "test")

# Fractions may carry rounding slop from published percentages; anything
# beyond this is treated as a real error.
_FRACTION_SUM_TOL = 1e-2


@dataclass(frozen=True)
class DatasetIndex:
    """Sample ids with labels; labels may be raw lists, sets, or final strings."""

    sample_ids: tuple
    labels: tuple
    split_assignment: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.sample_ids) != len(self.labels):
            raise SplitError(
                f"{len(self.sample_ids)} ids for {len(self.labels)} labels"
            )
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise SplitError("duplicate sample ids in index")
        if self.split_assignment is not None:
            object.__setattr__(self, "split_assignment", tuple(self.split_assignment))
            if len(self.split_assignment) != len(self.sample_ids):
                raise SplitError("split assignment length mismatch")

    def __len__(self) -> int:
        return len(self.sample_ids)

    def subset_ids(self, name: str) -> list:
        if self.split_assignment is None:
            raise SplitError("index carries no split assignment")
        return [
            s for s, a in zip(self.sample_ids, self.split_assignment) if a == name
        ]


def load_label_map(path) -> dict:
    """Raw statement -> super-class map; a null value drops the statement."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise SplitError(f"label map {path} must be a JSON object")
    return {str(k): (None if v is None else str(v)) for k, v in doc.items()}


def bundled_label_map(name: str = "ptbxl_superclass") -> dict:
    """Load a label map shipped with the package."""
    path = Path(__file__).parent / "data" / f"{name}_map.json"
    if not path.exists():
        raise SplitError(f"no bundled label map named '{name}'")
    return load_label_map(path)


def apply_label_map(index: DatasetIndex, label_map: dict) -> DatasetIndex:
    """Map raw per-sample statements to frozensets of super-classes.

    Each sample's label may be a single statement or an iterable of them.
    Statements mapped to null contribute nothing.  Statements absent from
    the map are an error, reported all at once.
    """
    unmapped = set()
    new_labels = []
    for raw in index.labels:
        stmts = [raw] if isinstance(raw, str) else list(raw)
        supers = set()
        for s in stmts:
            if s not in label_map:
                unmapped.add(s)
            else:
                target = label_map[s]
                if target is not None:
                    supers.add(target)
        new_labels.append(frozenset(supers))
    if unmapped:
        raise SplitError(f"unmapped raw labels: {sorted(unmapped)}")
    return DatasetIndex(index.sample_ids, tuple(new_labels), index.split_assignment)


def filter_unique(index: DatasetIndex) -> tuple[DatasetIndex, int]:
    """Keep samples whose label set has exactly one member.

    Returns the filtered index (labels become plain strings) and the number
    of samples removed.
    """
    keep_ids, keep_labels = [], []
    for sid, lab in zip(index.sample_ids, index.labels):
        members = {lab} if isinstance(lab, str) else set(lab)
        if len(members) == 1:
            keep_ids.append(sid)
            keep_labels.append(next(iter(members)))
    removed = len(index) - len(keep_ids)
    return DatasetIndex(tuple(keep_ids), tuple(keep_labels)), removed


def _apportion(n: int, fractions: np.ndarray, rng) -> list:
    """Largest-remainder apportionment of n items over the fractions.

    Ties among remainders break by a seeded random priority so the result is
    deterministic for a given generator state.
    """
    quotas = fractions * n
    counts = np.floor(quotas).astype(int)
    leftover = n - int(counts.sum())
    if leftover > 0:
        remainders = quotas - counts
        priority = rng.permutation(len(fractions))
        order = sorted(
            range(len(fractions)),
            key=lambda i: (-remainders[i], priority[i]),
        )
        for i in order[:leftover]:
            counts[i] += 1
    return counts.tolist()


def stratified_split(
    index: DatasetIndex, fractions=(0.7, 0.15, 0.15), seed: int = 0
) -> DatasetIndex:
    """Assign every sample to train/val/test, stratified by class.

    Fractions must be positive and sum to 1 (published fractions are accepted
    within 1e-2 and renormalized).  A single-sample class goes to train with
    a warning; any larger class is apportioned by largest remainder, so train
    always holds at least one of its samples when its fraction is largest.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.shape != (len(SUBSET_NAMES),):
        raise SplitError(
            f"expected {len(SUBSET_NAMES)} fractions, got shape {fractions.shape}"
        )
    if np.any(fractions <= 0):
        raise SplitError(f"fractions must be positive, got {fractions.tolist()}")
    total = float(fractions.sum())
    if abs(total - 1.0) > _FRACTION_SUM_TOL:
        raise SplitError(
            f"fractions must sum to 1 (within {_FRACTION_SUM_TOL}), got {total}"
        )
    fractions = fractions / total
    for lab in index.labels:
        if not isinstance(lab, str):
            raise SplitError(
                f"stratified_split needs single string labels, got {lab!r}; "
                "apply filter_unique first"
            )

    classes = sorted(set(index.labels))
    assignment = {}
    for ci, cls in enumerate(classes):
        ids = [s for s, l in zip(index.sample_ids, index.labels) if l == cls]
        rng = np.random.default_rng(
            np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, ci])
        )
        if len(ids) == 1:
            # apportionment could place a lone sample outside train, which
            # would leave the class untrainable
            warnings.warn(
                f"class '{cls}' has only 1 sample; assigning it to train",
                stacklevel=2,
            )
            assignment[ids[0]] = "train"
            continue
        perm = rng.permutation(len(ids))
        shuffled = [ids[i] for i in perm]
        counts = _apportion(len(ids), fractions, rng)
        start = 0
        for name, cnt in zip(SUBSET_NAMES, counts):
            for s in shuffled[start : start + cnt]:
                assignment[s] = name
            start += cnt
    return DatasetIndex(
        index.sample_ids,
        index.labels,
        tuple(assignment[s] for s in index.sample_ids),
    )


def split_counts(index: DatasetIndex) -> dict:
    """Subset -> class -> count summary of an assigned index."""
    out = {name: {} for name in SUBSET_NAMES}
    for lab, sub in zip(index.labels, index.split_assignment):
        out[sub][lab] = out[sub].get(lab, 0) + 1
    return out


def write_split_csv(index: DatasetIndex, path) -> None:
    if index.split_assignment is None:
        raise SplitError("index carries no split assignment")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "label", "subset"])
        for sid, lab, sub in zip(
            index.sample_ids, index.labels, index.split_assignment
        ):
            w.writerow([sid, lab, sub])


def read_split_csv(path) -> DatasetIndex:
    ids, labels, subsets = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"sample_id", "label", "subset"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise SplitError(f"{path}: header must include {sorted(need)}")
        for row in reader:
            ids.append(row["sample_id"])
            labels.append(row["label"])
            if row["subset"] not in SUBSET_NAMES:
                raise SplitError(f"{path}: unknown subset '{row['subset']}'")
            subsets.append(row["subset"])
    return DatasetIndex(tuple(ids), tuple(labels), tuple(subsets))
