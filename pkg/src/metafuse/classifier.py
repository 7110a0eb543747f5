"""Multinomial softmax regression trained by full-batch gradient descent.

Parameters start at zero and update with a constant learning rate until the
gradient infinity-norm falls below tolerance or the epoch cap is reached.
The bias is carried as an implicit constant-one input column; computation is
float64 throughout regardless of the feature matrix's storage dtype.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, FormatError, InputError, ParameterError, TrainingError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_epochs: int = 2000
    gradient_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ParameterError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise ParameterError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not (self.gradient_tol >= 0):
            raise ParameterError(f"gradient_tol must be >= 0, got {self.gradient_tol}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "gradient_tol": self.gradient_tol,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SoftmaxModel:
    weights: np.ndarray  # (d, K) float64
    bias: np.ndarray  # (K,) float64
    class_names: tuple
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if w.ndim != 2:
            raise InputError(f"weights must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[1],):
            raise InputError(f"bias shape {b.shape} does not match {w.shape[1]} classes")
        if len(self.class_names) != w.shape[1]:
            raise InputError(
                f"{len(self.class_names)} class names for {w.shape[1]} classes"
            )

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


def predict_proba(model: SoftmaxModel, x) -> np.ndarray:
    """Class probabilities for one feature vector or a matrix of them."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise InputError(
            f"expected features of width {model.n_features}, got shape {x.shape}"
        )
    probs = _softmax_rows(x @ model.weights + model.bias)
    return probs[0] if single else probs


def predict(model: SoftmaxModel, x) -> np.ndarray:
    """Predicted class indices; ties resolve to the lowest index."""
    probs = predict_proba(model, x)
    if probs.ndim == 1:
        return int(np.argmax(probs))
    return np.argmax(probs, axis=1)


def _mean_shifted(values: np.ndarray, weights: np.ndarray | None) -> float:
    # Mean via deviation from the first element: exact for constant input
    # (the zero-model loss is then ln K to the last bit) and no worse than a
    # direct sum otherwise.
    c = float(values[0])
    if weights is None:
        return c + float(np.sum(values - c)) / values.size
    wsum = float(np.sum(weights))
    return c + float(np.sum(weights * (values - c))) / wsum


def loss_and_gradient(
    model: SoftmaxModel, X, y, class_weights=None
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient.

    The gradient is ``(d+1) x K``: rows ``[:d]`` match the weights, the last
    row is the bias gradient.  With ``class_weights`` (length K), sample
    losses are weighted by their true class and normalized by total weight.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InputError(f"expected N x {model.n_features} features, got {X.shape}")
    if y.shape != (X.shape[0],):
        raise InputError(f"labels must be length {X.shape[0]}, got shape {y.shape}")
    if X.shape[0] == 0:
        raise InputError("cannot evaluate the loss on zero samples")
    y = y.astype(np.int64)
    k = model.n_classes
    if y.min() < 0 or y.max() >= k:
        raise InputError(f"labels must lie in [0, {k}), got range "
                         f"[{y.min()}, {y.max()}]")
    n = X.shape[0]

    logits = X @ model.weights + model.bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.sum(np.exp(shifted), axis=1))
    nll = logsum - shifted[np.arange(n), y]

    sample_w = None
    if class_weights is not None:
        class_weights = np.asarray(class_weights, dtype=np.float64)
        if class_weights.shape != (k,):
            raise InputError(
                f"class_weights must be length {k}, got shape {class_weights.shape}"
            )
        sample_w = class_weights[y]
    loss = _mean_shifted(nll, sample_w)

    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    resid = probs
    resid[np.arange(n), y] -= 1.0
    if sample_w is None:
        resid /= n
    else:
        resid *= (sample_w / sample_w.sum())[:, None]
    grad = np.empty((model.n_features + 1, k))
    np.matmul(X.T, resid, out=grad[:-1])
    grad[-1] = resid.sum(axis=0)
    return float(loss), grad


def train(
    X,
    y,
    cfg: TrainConfig | None = None,
    class_names=None,
    class_weights=None,
    record_history: bool = False,
) -> SoftmaxModel:
    """Fit from zero initialization with full-batch gradient descent.

    Stops after ``max_epochs`` updates or as soon as the gradient
    infinity-norm drops below ``gradient_tol``, whichever comes first.
    Training is deterministic: no randomness enters the optimization.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise InputError(f"features must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise InputError(f"labels must be length {X.shape[0]}, got shape {y.shape}")
    if X.shape[0] == 0:
        raise TrainingError("cannot train on zero samples")
    if class_names is None:
        k = int(y.max()) + 1 if y.size else 0
        class_names = tuple(str(i) for i in range(k))
    else:
        class_names = tuple(str(c) for c in class_names)
        k = len(class_names)
    if y.min() < 0 or y.max() >= k:
        raise TrainingError(f"labels must lie in [0, {k})")
    present = np.bincount(y, minlength=k) > 0
    if not np.all(present):
        missing = [class_names[i] for i in np.flatnonzero(~present)]
        raise TrainingError(f"no training samples for class(es): {missing}")

    d = X.shape[1]
    model = SoftmaxModel(
        weights=np.zeros((d, k)), bias=np.zeros(k), class_names=class_names
    )
    history = [] if record_history else None
    epochs_run = 0
    stop_reason = "max_epochs"
    grad_norm = math.inf
    loss = math.nan
    # divergence is detected explicitly below, so numpy's overflow warnings
    # on the way to a non-finite loss are redundant noise
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.max_epochs):
            loss, grad = loss_and_gradient(model, X, y, class_weights)
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            if history is not None:
                history.append(loss)
            grad_norm = float(np.abs(grad).max())
            if grad_norm < cfg.gradient_tol:
                stop_reason = "gradient_tol"
                break
            object.__setattr__(
                model, "weights", model.weights - cfg.learning_rate * grad[:-1]
            )
            object.__setattr__(
                model, "bias", model.bias - cfg.learning_rate * grad[-1]
            )
            epochs_run = epoch + 1

    meta = {
        "epochs_run": epochs_run,
        "stop_reason": stop_reason,
        "final_gradient_norm": grad_norm,
        "final_loss": loss,
        "learning_rate": cfg.learning_rate,
        "max_epochs": cfg.max_epochs,
        "gradient_tol": cfg.gradient_tol,
        "seed": cfg.seed,
    }
    if history is not None:
        meta["loss_history"] = history
    object.__setattr__(model, "training_meta", meta)
    return model


def save_model(model: SoftmaxModel, path) -> None:
    doc = {
        "class_names": list(model.class_names),
        "d": model.n_features,
        "K": model.n_classes,
        "weights": [[float(v) for v in row] for row in model.weights],
        "bias": [float(v) for v in model.bias],
        "training_meta": model.training_meta,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path) -> SoftmaxModel:
    doc = json.loads(Path(path).read_text())
    for key in ("class_names", "weights", "bias"):
        if key not in doc:
            raise FormatError(f"{path}: model file lacks '{key}'")
    w = np.asarray(doc["weights"], dtype=np.float64)
    if w.ndim != 2 or w.shape != (doc.get("d", w.shape[0]), doc.get("K", w.shape[1])):
        raise FormatError(f"{path}: weight shape {w.shape} disagrees with header")
    return SoftmaxModel(
        weights=w,
        bias=np.asarray(doc["bias"], dtype=np.float64),
        class_names=tuple(doc["class_names"]),
        training_meta=doc.get("training_meta", {}),
    )
