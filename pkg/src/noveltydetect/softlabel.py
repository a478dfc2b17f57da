"""Multinomial logistic models providing per-class confidence vectors.

Every score in the library consumes the strictly positive, normalized
confidence vectors these models emit. Margins of max-margin classifiers can
be negative and are deliberately unsupported as a confidence source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset

__all__ = [
    "SoftLabelModel",
    "TrainConfig",
    "train_softmax",
    "predict_confidences",
    "predict_confidence_matrix",
    "training_accuracy",
    "save_softlabel",
    "load_softlabel",
]

CONFIDENCE_FLOOR = 1e-12

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class SoftLabelModel:
    """Affine scores + softmax over k classes."""

    weights: np.ndarray  # (k, d)
    biases: np.ndarray  # (k,)
    class_index: dict[str, int]

    def __post_init__(self):
        k, _ = self.weights.shape
        if k < 2:
            raise ValueError("need at least 2 classes")
        if len(self.class_index) != k or self.biases.shape != (k,):
            raise ValueError("weights, biases and class_index disagree on k")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def classes(self) -> list[str]:
        out = [""] * self.k
        for lab, idx in self.class_index.items():
            out[idx] = lab
        return out


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    l2_penalty: float = 1e-3
    max_epochs: int = 200
    tolerance: float = 1e-6  # stop when per-epoch loss improvement drops below
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.max_epochs <= 0 or self.tolerance <= 0:
            raise ValueError("learning_rate, max_epochs, tolerance must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_gradients(X, onehot, W, b, l2):
    n = X.shape[0]
    probs = _softmax_rows(X @ W.T + b)
    # clip only inside the log; probabilities themselves stay exact
    ll = -np.log(np.maximum(probs[onehot.astype(bool)], 1e-300)).sum() / n
    loss = ll + 0.5 * l2 * float((W * W).sum())
    delta = probs - onehot
    grad_w = delta.T @ X / n + l2 * W
    grad_b = delta.mean(axis=0)
    return loss, grad_w, grad_b


def train_softmax(ds: LabeledDataset, cfg: TrainConfig) -> SoftLabelModel:
    """Fit a multinomial logistic model by full-batch gradient descent.

    Minimizes mean cross-entropy plus l2_penalty * ||W||^2 / 2 from a zero
    initialization. A step that would increase the loss is retried with a
    halved learning rate, so the loss is non-increasing across accepted
    epochs; training stops when the improvement falls below cfg.tolerance.
    The procedure is deterministic (the config seed does not influence it).
    """
    if ds.num_classes < 2:
        raise ValueError("training data must contain at least 2 classes")
    X = ds.features
    if not np.isfinite(X).all():
        raise ValueError("non-finite feature values")
    y = ds.label_indices()
    k, d, n = ds.num_classes, ds.dim, ds.n
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    W = np.zeros((k, d))
    b = np.zeros(k)
    lr = cfg.learning_rate
    loss, grad_w, grad_b = _loss_and_gradients(X, onehot, W, b, cfg.l2_penalty)
    for _ in range(cfg.max_epochs):
        accepted = False
        for _ in range(60):  # halve until the step no longer overshoots
            W_new = W - lr * grad_w
            b_new = b - lr * grad_b
            new_loss, new_gw, new_gb = _loss_and_gradients(
                X, onehot, W_new, b_new, cfg.l2_penalty
            )
            if new_loss <= loss:
                accepted = True
                break
            lr *= 0.5
        if not accepted:
            break
        improvement = loss - new_loss
        W, b, loss, grad_w, grad_b = W_new, b_new, new_loss, new_gw, new_gb
        if improvement < cfg.tolerance:
            break
    return SoftLabelModel(weights=W, biases=b, class_index=dict(ds.class_index))


def predict_confidence_matrix(model: SoftLabelModel, X: np.ndarray) -> np.ndarray:
    """Confidence vectors for each row of X: floored at 1e-12, renormalized."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError(f"expected (n, {model.dim}) input, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("non-finite input")
    probs = _softmax_rows(X @ model.weights.T + model.biases)
    probs = np.maximum(probs, CONFIDENCE_FLOOR)
    return probs / probs.sum(axis=1, keepdims=True)


def predict_confidences(model: SoftLabelModel, x: np.ndarray) -> np.ndarray:
    """Length-k confidence vector for a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a length-{model.dim} vector, got shape {x.shape}")
    return predict_confidence_matrix(model, x[None, :])[0]


def training_accuracy(model: SoftLabelModel, ds: LabeledDataset) -> float:
    probs = predict_confidence_matrix(model, ds.features)
    local = np.array([model.class_index[lab] for lab in ds.labels])
    return float((probs.argmax(axis=1) == local).mean())


def save_softlabel(model: SoftLabelModel, path: str) -> None:
    """Flat text serialization: one ``name,index...,value`` line per parameter."""
    with open(path, "w", encoding="utf-8") as fh:
        for lab in model.classes():
            fh.write(f"class,{model.class_index[lab]},{lab}\n")
        for i in range(model.k):
            for j in range(model.dim):
                fh.write(f"weight,{i},{j},{FLOAT_FORMAT % model.weights[i, j]}\n")
        for i in range(model.k):
            fh.write(f"bias,{i},{FLOAT_FORMAT % model.biases[i]}\n")


def load_softlabel(path: str) -> SoftLabelModel:
    class_index: dict[str, int] = {}
    weights: dict[tuple[int, int], float] = {}
    biases: dict[int, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            kind, rest = line.split(",", 1)
            if kind == "class":
                idx, lab = rest.split(",", 1)
                class_index[lab] = int(idx)
            elif kind == "weight":
                i, j, v = rest.split(",")
                weights[(int(i), int(j))] = float(v)
            elif kind == "bias":
                i, v = rest.split(",")
                biases[int(i)] = float(v)
            else:
                raise ValueError(f"unknown record {kind!r} in {path}")
    k = len(class_index)
    d = 1 + max(j for _, j in weights)
    W = np.empty((k, d))
    for (i, j), v in weights.items():
        W[i, j] = v
    bvec = np.empty(k)
    for i, v in biases.items():
        bvec[i] = v
    return SoftLabelModel(weights=W, biases=bvec, class_index=class_index)
