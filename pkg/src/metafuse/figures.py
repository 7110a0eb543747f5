"""Report figures rendered to files next to the delimited output."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .interpret import WeightReport
from .metrics import ImprovementReport


def improvement_bar(report: ImprovementReport, path) -> None:
    """Bar chart of macro-metric percentage-point deltas."""
    names = list(report.macro_deltas)
    values = [report.macro_deltas[n] for n in names]
    fig, ax = plt.subplots(figsize=(8, 4))
    colors = ["#2a7e43" if v >= 0 else "#b03a2e" for v in values]
    ax.bar(range(len(names)), values, color=colors)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("improvement (percentage points)")
    ax.set_title("Fused minus image-only, macro metrics")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def auroc_delta_box(report: ImprovementReport, path) -> None:
    """Boxplot of per-class AUROC deltas with the significance annotation."""
    deltas = np.asarray(report.auroc_deltas, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.boxplot([deltas], tick_labels=["AUROC delta"])
    ax.scatter(np.ones_like(deltas), deltas, color="#34495e", zorder=3, s=18)
    ax.axhline(0.0, color="black", linewidth=0.8, linestyle="--")
    ax.set_ylabel("per-class delta (percentage points)")
    label = f"p = {report.p_value:.4g} {report.stars}".strip()
    ax.set_title(label)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def weight_histograms(
    image_only: WeightReport, fused: WeightReport, path
) -> None:
    """Per-class weight histograms: image-only model on top, fused below,
    fused metadata weights as labeled bars at the bottom."""
    classes = list(fused.class_names)
    k = len(classes)
    fig, axes = plt.subplots(3, k, figsize=(3.2 * k, 8), squeeze=False)
    img_edges = fused.image_bin_edges
    centers = 0.5 * (img_edges[:-1] + img_edges[1:])
    width = float(img_edges[1] - img_edges[0])
    for j, cls in enumerate(classes):
        top = axes[0][j]
        counts, _ = np.histogram(image_only.image_weights[:, j], bins=img_edges)
        top.bar(centers, counts, width=width, color="#5d6d7e")
        top.set_title(f"{cls}\nimage-only")
        mid = axes[1][j]
        counts, _ = np.histogram(fused.image_weights[:, j], bins=img_edges)
        mid.bar(centers, counts, width=width, color="#2e86c1")
        mid.set_title("fused: image block")
        bot = axes[2][j]
        names = list(fused.metadata_names)
        vals = fused.metadata_weights[:, j]
        bot.bar(range(len(names)), vals, color="#b9770e")
        bot.set_xticks(range(len(names)))
        bot.set_xticklabels(names, rotation=90, fontsize=6)
        bot.set_title("fused: metadata block")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
