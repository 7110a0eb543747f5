"""Supervised fine-tuning: fresh classification head, SGD with momentum.

The backbone and a newly initialized linear head train jointly with
cross-entropy; afterwards the head is discarded and the tuned backbone
extracts features exactly as the BN path does.  Zero epochs leave the
backbone untouched, so FT(0) features equal BN features bit for bit.
The training set is materialized in memory, which fits this package's
dataset sizes; order within each epoch reshuffles when ``shuffle`` is on.
"""
from __future__ import annotations

import torch
from torch import nn

from .errors import TrainingError
from .images import load_batch


class _HeadedModel(nn.Module):
    def __init__(self, backbone: nn.Module, head: nn.Module):
        super().__init__()
        self.backbone = backbone
        self.head = head

    def forward(self, x):
        return self.head(self.backbone(x))


def fine_tune(backbone, feature_dim: int, rows, input_size: int, cfg):
    """Tune the backbone on the manifest's labels; returns (backbone, info)."""
    class_names = tuple(sorted({r.label for r in rows}))
    if len(class_names) < 2:
        raise TrainingError(
            f"fine-tuning needs at least 2 classes, got {class_names}"
        )
    targets = torch.tensor([class_names.index(r.label) for r in rows])
    images = load_batch(rows, input_size)
    torch.manual_seed(cfg.seed)
    head = nn.Linear(feature_dim, len(class_names))
    model = _HeadedModel(backbone, head)
    model.train()
    optimizer = torch.optim.SGD(
        model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum
    )
    loss_fn = nn.CrossEntropyLoss()
    order_rng = torch.Generator().manual_seed(cfg.seed)
    n = len(rows)
    epoch_orders = []
    last_loss = None
    for epoch in range(cfg.epochs):
        if cfg.shuffle:
            order = torch.randperm(n, generator=order_rng)
        else:
            order = torch.arange(n)
        epoch_orders.append([int(i) for i in order])
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(images[idx]), targets[idx])
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"loss diverged to {float(loss.detach())!r} at epoch {epoch + 1}"
                )
            loss.backward()
            optimizer.step()
            last_loss = float(loss.detach())
    backbone.eval()
    info = {
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "momentum": cfg.momentum,
        "batch_size": cfg.batch_size,
        "shuffle_per_epoch": cfg.shuffle,
        "seed": cfg.seed,
        "classes": list(class_names),
        "final_loss": last_loss,
        "epoch_orders": epoch_orders,
    }
    return backbone, info
