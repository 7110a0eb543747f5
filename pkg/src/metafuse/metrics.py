"""One-vs-rest classification metrics, AUROC, and paired comparison.

Per-class metrics come from the binary confusion counts of each class
against the rest.  Any metric whose denominator is zero is reported as 0 and
flagged.  Macro values are unweighted means over classes with the population
standard deviation.  Improvement deltas are percentage points computed as
``100*fused - 100*base`` so a 0.70 -> 0.80 move is exactly +10.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError

METRIC_NAMES = (
    "accuracy",
    "specificity",
    "sensitivity",
    "precision",
    "f_measure",
    "informedness",
    "markedness",
    "mcc",
)


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-class one-vs-rest counts; arrays are length ``n_classes``."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.tp)

    @property
    def n_samples(self) -> int:
        return int(self.tp[0] + self.fp[0] + self.fn[0] + self.tn[0])


def confusion(y_true, y_pred, n_classes: int) -> ConfusionCounts:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.ndim != 1 or y_true.shape != y_pred.shape:
        raise InputError(
            f"label vectors must be 1-D and equal length, got "
            f"{y_true.shape} vs {y_pred.shape}"
        )
    if y_true.size == 0:
        raise InputError("cannot build a confusion from zero samples")
    if n_classes < 2:
        raise InputError(f"need at least 2 classes, got {n_classes}")
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise InputError(
                f"{name} labels must lie in [0, {n_classes}), got range "
                f"[{arr.min()}, {arr.max()}]"
            )
    n = y_true.size
    tp = np.zeros(n_classes, dtype=np.int64)
    fp = np.zeros(n_classes, dtype=np.int64)
    fn = np.zeros(n_classes, dtype=np.int64)
    for c in range(n_classes):
        tp[c] = np.sum((y_true == c) & (y_pred == c))
        fp[c] = np.sum((y_true != c) & (y_pred == c))
        fn[c] = np.sum((y_true == c) & (y_pred != c))
    tn = n - tp - fp - fn
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num: float, den: float, flags: list, cls: int, metric: str) -> float:
    if den == 0:
        flags.append((cls, metric))
        return 0.0
    return num / den


def class_metrics(counts: ConfusionCounts) -> tuple[dict, list]:
    """Per-class metric arrays plus ``(class, metric)`` zero-denominator flags."""
    k = counts.n_classes
    out = {name: np.zeros(k) for name in METRIC_NAMES}
    flags: list = []
    for c in range(k):
        tp = int(counts.tp[c])
        fp = int(counts.fp[c])
        fn = int(counts.fn[c])
        tn = int(counts.tn[c])
        n = tp + fp + fn + tn
        sens = _ratio(tp, tp + fn, flags, c, "sensitivity")
        spec = _ratio(tn, tn + fp, flags, c, "specificity")
        prec = _ratio(tp, tp + fp, flags, c, "precision")
        npv = _ratio(tn, tn + fn, flags, c, "npv")
        out["accuracy"][c] = _ratio(tp + tn, n, flags, c, "accuracy")
        out["sensitivity"][c] = sens
        out["specificity"][c] = spec
        out["precision"][c] = prec
        out["f_measure"][c] = _ratio(2.0 * prec * sens, prec + sens, flags, c, "f_measure")
        out["informedness"][c] = sens + spec - 1.0
        out["markedness"][c] = prec + npv - 1.0
        den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
        if den == 0:
            flags.append((c, "mcc"))
            out["mcc"][c] = 0.0
        else:
            out["mcc"][c] = (tp * tn - fp * fn) / math.sqrt(den)
    return out, flags


def auroc(y_true, scores) -> float:
    """Area under the ROC curve by trapezoidal threshold sweep.

    ``y_true`` holds binary indicators (1 = positive).  Tied scores
    contribute half, so the value equals the Mann-Whitney statistic.
    """
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if y_true.shape != scores.shape or y_true.ndim != 1:
        raise InputError("y_true and scores must be equal-length 1-D vectors")
    pos = y_true == 1
    n_pos = int(np.sum(pos))
    n_neg = y_true.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError(
            f"AUROC undefined: {n_pos} positives, {n_neg} negatives"
        )
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = pos[order].astype(np.float64)
    # group ties: take cumulative counts only where the threshold changes
    tps = np.cumsum(sorted_pos)
    fps = np.cumsum(1.0 - sorted_pos)
    last_of_group = np.r_[np.flatnonzero(np.diff(sorted_scores)), y_true.size - 1]
    tpr = np.r_[0.0, tps[last_of_group] / n_pos]
    fpr = np.r_[0.0, fps[last_of_group] / n_neg]
    return float(np.trapezoid(tpr, fpr))


def macro(per_class: dict) -> dict:
    """Unweighted mean and population standard deviation per metric."""
    out = {}
    for name, values in per_class.items():
        arr = np.asarray(values, dtype=np.float64)
        out[name] = {"mean": float(arr.mean()), "std": float(arr.std())}
    return out


def improvement_delta(base: float, fused: float) -> float:
    """Percentage-point delta; 0.70 -> 0.80 yields exactly +10."""
    return 100.0 * fused - 100.0 * base


def wilcoxon_exact(differences) -> float:
    """Exact two-sided signed-rank p-value over paired differences.

    Zero differences are dropped (all zeros gives p = 1).  Ties in absolute
    value take midranks.  The null distribution enumerates every sign
    assignment exactly (dynamic program over doubled ranks), and the
    two-sided p doubles the smaller tail, capped at 1.
    """
    d = np.asarray(differences, dtype=np.float64)
    if d.ndim != 1:
        raise InputError(f"differences must be 1-D, got shape {d.shape}")
    d = d[d != 0.0]
    m = d.size
    if m == 0:
        return 1.0
    absd = np.abs(d)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(m, dtype=np.float64)
    sorted_abs = absd[order]
    i = 0
    while i < m:
        j = i
        while j + 1 < m and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank of the tied run
        i = j + 1
    # doubled midranks are integers, enabling an exact subset-sum count
    r2 = np.rint(2.0 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in r2:
        counts[r:] = counts[r:] + counts[:-r]
    w_pos = int(np.rint(2.0 * ranks[d > 0].sum()))
    denom = Fraction(2) ** m
    p_low = Fraction(int(sum(counts[: w_pos + 1])), 1) / denom
    p_high = Fraction(int(sum(counts[w_pos:])), 1) / denom
    p = 2 * min(p_low, p_high)
    return float(min(p, Fraction(1)))


def significance_stars(p: float) -> str:
    if p <= 0.05:
        return "**"
    if p <= 0.10:
        return "*"
    return ""


@dataclass(frozen=True)
class MetricReport:
    class_names: tuple
    per_class: dict  # metric name -> length-K list (includes "auroc")
    macro_metrics: dict  # metric name -> {"mean": .., "std": ..}
    overall_accuracy: float
    n_samples: int
    zero_denominator_flags: list

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "per_class": {
                name: [float(v) for v in vals]
                for name, vals in self.per_class.items()
            },
            "macro": self.macro_metrics,
            "overall_accuracy": self.overall_accuracy,
            "n_samples": self.n_samples,
            "zero_denominator_flags": [
                {"class": self.class_names[c], "metric": m}
                for c, m in self.zero_denominator_flags
            ],
            "conventions": {
                "macro_std": "population",
                "zero_denominator": "metric reported as 0 and flagged",
                "auroc": "trapezoidal; ties count half",
            },
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["class", "metric", "value"])
            for name, vals in self.per_class.items():
                for cls, v in zip(self.class_names, vals):
                    w.writerow([cls, name, repr(float(v))])
            for name, ms in self.macro_metrics.items():
                w.writerow(["__macro__", name, repr(ms["mean"])])
                w.writerow(["__macro_std__", name, repr(ms["std"])])
            w.writerow(["__overall__", "accuracy", repr(self.overall_accuracy)])


def report_from_json(path) -> MetricReport:
    """Load a report previously written by :meth:`MetricReport.write_json`."""
    try:
        doc = json.loads(Path(path).read_text())
        class_names = tuple(doc["class_names"])
        return MetricReport(
            class_names=class_names,
            per_class={k: list(v) for k, v in doc["per_class"].items()},
            macro_metrics=doc["macro"],
            overall_accuracy=float(doc["overall_accuracy"]),
            n_samples=int(doc["n_samples"]),
            zero_denominator_flags=[
                (class_names.index(f["class"]), f["metric"])
                for f in doc["zero_denominator_flags"]
            ],
        )
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise FormatError(f"{path} is not a metrics report: {exc}") from exc


def build_report(y_true, y_pred, scores, class_names) -> MetricReport:
    """Full metric suite for one model's predictions.

    ``scores`` is the ``N x K`` class-probability (or score) matrix used for
    the one-vs-rest AUROC sweep.
    """
    class_names = tuple(class_names)
    k = len(class_names)
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (y_true.size, k):
        raise InputError(
            f"scores must be {y_true.size} x {k}, got shape {scores.shape}"
        )
    counts = confusion(y_true, y_pred, k)
    per_class, flags = class_metrics(counts)
    per_class = {name: vals.tolist() for name, vals in per_class.items()}
    per_class["auroc"] = [
        auroc((y_true == c).astype(int), scores[:, c]) for c in range(k)
    ]
    overall = float(np.mean(y_true == y_pred))
    return MetricReport(
        class_names=class_names,
        per_class=per_class,
        macro_metrics=macro(per_class),
        overall_accuracy=overall,
        n_samples=int(y_true.size),
        zero_denominator_flags=flags,
    )


@dataclass(frozen=True)
class ImprovementReport:
    """Fused-minus-base deltas in percentage points, with significance."""

    class_names: tuple
    macro_deltas: dict  # metric -> pp delta of macro means
    overall_accuracy_delta: float
    auroc_deltas: list  # per class, pp
    base_auroc: list
    fused_auroc: list
    p_value: float
    stars: str

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "macro_deltas_pp": self.macro_deltas,
            "overall_accuracy_delta_pp": self.overall_accuracy_delta,
            "auroc_per_class": {
                "base": self.base_auroc,
                "fused": self.fused_auroc,
                "delta_pp": self.auroc_deltas,
            },
            "significance": {
                "test": "exact two-sided Wilcoxon signed-rank on per-class AUROC",
                "p_value": self.p_value,
                "stars": self.stars,
                "thresholds": {"*": 0.10, "**": 0.05},
            },
            "convention": "delta = 100*fused - 100*base (percentage points)",
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "value"])
            for name, v in self.macro_deltas.items():
                w.writerow([f"macro_{name}_delta_pp", repr(v)])
            w.writerow(["overall_accuracy_delta_pp", repr(self.overall_accuracy_delta)])
            for cls, v in zip(self.class_names, self.auroc_deltas):
                w.writerow([f"auroc_delta_pp[{cls}]", repr(v)])
            w.writerow(["wilcoxon_p", repr(self.p_value)])
            w.writerow(["stars", self.stars])

    def write_boxplot_csv(self, path) -> None:
        """Per-class AUROC pairs in a plotting-friendly layout."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["class", "base_auroc", "fused_auroc", "delta_pp"])
            for cls, b, f, dl in zip(
                self.class_names, self.base_auroc, self.fused_auroc, self.auroc_deltas
            ):
                w.writerow([cls, repr(b), repr(f), repr(dl)])


def improvement(base: MetricReport, fused: MetricReport) -> ImprovementReport:
    if base.class_names != fused.class_names:
        raise InputError(
            f"reports cover different classes: {base.class_names} vs "
            f"{fused.class_names}"
        )
    macro_deltas = {
        name: improvement_delta(
            base.macro_metrics[name]["mean"], fused.macro_metrics[name]["mean"]
        )
        for name in fused.macro_metrics
    }
    base_auc = [float(v) for v in base.per_class["auroc"]]
    fused_auc = [float(v) for v in fused.per_class["auroc"]]
    deltas = [improvement_delta(b, f) for b, f in zip(base_auc, fused_auc)]
    p = wilcoxon_exact(np.array(fused_auc) - np.array(base_auc))
    return ImprovementReport(
        class_names=fused.class_names,
        macro_deltas=macro_deltas,
        overall_accuracy_delta=improvement_delta(
            base.overall_accuracy, fused.overall_accuracy
        ),
        auroc_deltas=deltas,
        base_auroc=base_auc,
        fused_auroc=fused_auc,
        p_value=p,
        stars=significance_stars(p),
    )


def compare_auroc(base_per_class, fused_per_class) -> tuple[float, str]:
    """Exact Wilcoxon p-value and star annotation for paired AUROC vectors."""
    base = np.asarray(base_per_class, dtype=np.float64)
    fused = np.asarray(fused_per_class, dtype=np.float64)
    if base.shape != fused.shape or base.ndim != 1:
        raise InputError("paired AUROC vectors must be equal-length 1-D")
    p = wilcoxon_exact(fused - base)
    return p, significance_stars(p)
