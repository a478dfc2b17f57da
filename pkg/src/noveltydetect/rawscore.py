"""Confidence-ratio novelty primitives.

A confidence set is an (s, k) array of per-class confidence vectors for s
points known to share one label. The raw novelty score is the ratio of the
largest to the second-largest entry of the set's mean confidence vector:
values near 1 mean the set's assignment is ambiguous, which is the typical
signature of a class absent from training.
"""

from __future__ import annotations

import numpy as np

from .dataset import LabeledDataset
from .softlabel import SoftLabelModel, predict_confidence_matrix

__all__ = [
    "check_confidence_set",
    "set_mean_confidence",
    "predicted_assignment",
    "raw_novelty_score",
    "class_novelty_score",
]


def check_confidence_set(vectors: np.ndarray) -> np.ndarray:
    """Validate an (s, k) confidence set: s >= 1, k >= 2, rows positive and normalized."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValueError(f"confidence set must be 2-D, got shape {vectors.shape}")
    s, k = vectors.shape
    if s < 1:
        raise ValueError("confidence set must contain at least one vector")
    if k < 2:
        raise ValueError("confidence vectors need at least 2 classes")
    if not (vectors > 0).all():
        raise ValueError("confidences must be strictly positive")
    if np.abs(vectors.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("each confidence vector must sum to 1")
    return vectors


def set_mean_confidence(vectors: np.ndarray) -> np.ndarray:
    """Column-wise mean of the set's confidence vectors."""
    return check_confidence_set(vectors).mean(axis=0)


def predicted_assignment(vectors: np.ndarray) -> int:
    """Class index with the largest mean confidence; ties go to the lowest index."""
    return int(np.argmax(set_mean_confidence(vectors)))


def raw_novelty_score(vectors: np.ndarray) -> float:
    """Largest over second-largest entry of the mean confidence vector (>= 1)."""
    mean = set_mean_confidence(vectors)
    top2 = np.partition(mean, -2)[-2:]
    return float(top2[1] / top2[0])


def class_novelty_score(model: SoftLabelModel, features: np.ndarray) -> float:
    """Raw novelty score of all calibration examples of one class under `model`.

    `features` holds every calibration example of the class, one row each.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("need at least one calibration example")
    return raw_novelty_score(predict_confidence_matrix(model, features))


def class_novelty_table(model: SoftLabelModel, ds: LabeledDataset) -> dict[str, float]:
    """Per-class calibration scores for every class present in `ds`."""
    probs = predict_confidence_matrix(model, ds.features)
    table: dict[str, float] = {}
    for lab in ds.classes():
        rows = ds.rows_of_class(lab)
        table[lab] = raw_novelty_score(probs[rows])
    return table
