"""Model registry: eight source architectures, head removal, weight pinning.

Each entry names the deepest layer prior to classification per torchvision
convention; loading replaces that layer with an identity so the forward
pass emits the bottleneck feature vector.  Published ImageNet weights are
fetched when the zoo host is reachable; otherwise the backbone falls back
to a deterministic per-architecture seeded initialization.  Either way the
state dict actually used is pinned by SHA-256 in the returned provenance,
so downstream artifacts record exactly which weights produced them.
"""
from __future__ import annotations

import hashlib
import socket
from dataclasses import dataclass

import torch
from torch import nn
from torchvision import models as tv_models

from .errors import ConfigurationError

FETCH_TIMEOUT_S = 15.0


@dataclass(frozen=True)
class ZooEntry:
    key: str
    torchvision_name: str | None
    head: tuple
    feature_dim: int
    input_size: int
    fallback_kwargs: tuple = ()


_ENTRIES = (
    ZooEntry("alexnet", "alexnet", ("classifier", 6), 4096, 224),
    ZooEntry("vgg16", "vgg16", ("classifier", 6), 4096, 224),
    ZooEntry("vgg19", "vgg19", ("classifier", 6), 4096, 224),
    ZooEntry("resnet50", "resnet50", ("fc",), 2048, 224),
    ZooEntry("densenet201", "densenet201", ("classifier",), 1920, 224),
    ZooEntry("mobilenetv2", "mobilenet_v2", ("classifier", 1), 1280, 224),
    ZooEntry("googlenet", "googlenet", ("fc",), 1024, 224, (("init_weights", True),)),
    ZooEntry("inceptionresnetv2", None, (), 1536, 299),
)
REGISTRY = {entry.key: entry for entry in _ENTRIES}

# per-channel RGB statistics the zoo's published weights were trained with
NORMALIZATION = {
    "mean": (0.485, 0.456, 0.406),
    "std": (0.229, 0.224, 0.225),
}


def available_models() -> tuple:
    return tuple(REGISTRY)


def resolve(name: str) -> ZooEntry:
    key = str(name).lower().replace("-", "").replace("_", "")
    if key not in REGISTRY:
        raise ConfigurationError(
            f"unknown model {name!r}; choose one of {', '.join(REGISTRY)}"
        )
    entry = REGISTRY[key]
    if entry.torchvision_name is None:
        raise ConfigurationError(
            f"{entry.key} has no torchvision implementation; this zoo build "
            f"cannot provide it"
        )
    return entry


def _fallback_seed(key: str) -> int:
    digest = hashlib.sha256(f"deepextract:{key}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _head_parent(model: nn.Module, head: tuple):
    node = model
    for part in head[:-1]:
        node = node[part] if isinstance(part, int) else getattr(node, part)
    return node, head[-1]


def _get_head(model: nn.Module, head: tuple) -> nn.Module:
    parent, last = _head_parent(model, head)
    try:
        return parent[last] if isinstance(last, int) else getattr(parent, last)
    except (AttributeError, IndexError, KeyError) as exc:
        raise ConfigurationError(f"classification layer {head} not found") from exc


def _set_head(model: nn.Module, head: tuple, module: nn.Module) -> None:
    parent, last = _head_parent(model, head)
    if isinstance(last, int):
        parent[last] = module
    else:
        setattr(parent, last, module)


def state_dict_sha256(model: nn.Module) -> str:
    digest = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def load_backbone(name: str, fetch_weights: bool = True):
    """Build the architecture with its head removed; returns (model, entry, provenance).

    The model is in eval mode.  ``provenance`` records the weight source
    (published snapshot or seeded fallback) and the SHA-256 of the state
    dict actually loaded.
    """
    entry = resolve(name)
    model = None
    source = None
    if fetch_weights:
        previous_timeout = socket.getdefaulttimeout()
        socket.setdefaulttimeout(FETCH_TIMEOUT_S)
        try:
            enum = tv_models.get_model_weights(entry.torchvision_name).DEFAULT
            model = tv_models.get_model(entry.torchvision_name, weights=enum)
            source = f"torchvision:{enum}"
        except Exception:
            model = None
        finally:
            socket.setdefaulttimeout(previous_timeout)
    if model is None:
        seed = _fallback_seed(entry.key)
        torch.manual_seed(seed)
        model = tv_models.get_model(
            entry.torchvision_name, weights=None, **dict(entry.fallback_kwargs)
        )
        source = f"seeded-init:{seed}"
    head_layer = _get_head(model, entry.head)
    if not isinstance(head_layer, nn.Linear):
        raise ConfigurationError(
            f"{entry.key}: expected a linear classification layer at "
            f"{entry.head}, found {type(head_layer).__name__}"
        )
    if head_layer.in_features != entry.feature_dim:
        raise ConfigurationError(
            f"{entry.key}: head expects {head_layer.in_features} features, "
            f"registry says {entry.feature_dim}"
        )
    _set_head(model, entry.head, nn.Identity())
    model.eval()
    provenance = {
        "model": entry.key,
        "torchvision_model": entry.torchvision_name,
        "feature_layer": ".".join(str(p) for p in entry.head) + " -> identity",
        "feature_dim": entry.feature_dim,
        "weights_source": source,
        "state_dict_sha256": state_dict_sha256(model),
    }
    return model, entry, provenance
