"""Ensemble novelty detection via artificial class partitions.

The training classes are repeatedly split into presumed-known and
presumed-novel groups. For each split, a multiclass model trained on the
presumed-known classes turns held-out examples into confidence vectors;
confidence-ratio scores of same-label subsets, calibrated by the per-class
score of the predicted class, feed a tiny linear classifier that learns to
flag novel-looking sets. The final novelty score of a test set is the number
of these classifiers that vote novel, skipping classifiers whose split
presumed the set's globally predicted class to be novel.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ._seeds import child_seed
from .dataset import LabeledDataset
from .rawscore import predicted_assignment, raw_novelty_score
from .softlabel import (
    FLOAT_FORMAT,
    SoftLabelModel,
    TrainConfig,
    load_softlabel,
    predict_confidence_matrix,
    save_softlabel,
    train_softmax,
)

__all__ = [
    "Partition",
    "ScorePair",
    "Standardizer",
    "BinaryNoveltyClassifier",
    "EnsembleModel",
    "make_partitions",
    "represent_partition",
    "build_training_pairs",
    "train_linear_svm",
    "train_ensemble",
    "train_ensemble_multi",
    "ensemble_novelty_score",
    "score_sets",
    "save_ensemble",
    "load_ensemble",
]


@dataclass(frozen=True)
class Partition:
    """One artificial split of the training classes (global class indices)."""

    index: int
    presumed_known: frozenset[int]
    presumed_novel: frozenset[int]

    def __post_init__(self):
        if self.presumed_known & self.presumed_novel:
            raise ValueError("presumed_known and presumed_novel must be disjoint")
        if not self.presumed_novel:
            raise ValueError("each partition needs at least one presumed-novel class")
        if not self.presumed_known:
            raise ValueError("each partition needs at least one presumed-known class")


@dataclass(frozen=True)
class ScorePair:
    """(set score, calibration score of the predicted class) feature point."""

    theta_set: float
    theta_class: float

    def __post_init__(self):
        if not (np.isfinite(self.theta_set) and np.isfinite(self.theta_class)):
            raise ValueError("score pair must be finite")


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class BinaryNoveltyClassifier:
    """Per-partition unit: representation model, calibration table, separator."""

    partition: Partition
    partition_model: SoftLabelModel
    theta_table: dict[int, float]  # global class index -> calibration score
    w: np.ndarray
    b: float
    standardizer: Standardizer

    def __post_init__(self):
        if set(self.theta_table) != set(self.partition.presumed_known):
            raise ValueError("theta_table must cover exactly the presumed-known classes")
        if not (self.standardizer.std > 0).all():
            raise ValueError("standardizer std entries must be positive")

    def vote(self, theta_set: float, o_hat: int) -> bool:
        z = self.standardizer.apply([theta_set, self.theta_table[o_hat]])
        return float(z @ self.w + self.b) > 0.0


@dataclass(frozen=True)
class EnsembleModel:
    global_model: SoftLabelModel
    classifiers: tuple[BinaryNoveltyClassifier, ...]
    set_size: int

    def __post_init__(self):
        if len(self.classifiers) < 1:
            raise ValueError("need at least one classifier")
        if self.set_size < 1:
            raise ValueError("set_size must be positive")
        universe: set[int] = set()
        for clf in self.classifiers:
            universe |= clf.partition.presumed_known | clf.partition.presumed_novel
        counts = {c: 0 for c in universe}
        for clf in self.classifiers:
            for c in clf.partition.presumed_novel:
                counts[c] += 1
        if counts and max(counts.values()) - min(counts.values()) > 1:
            raise ValueError("presumed-novel counts unbalanced beyond 1 across classes")

    @property
    def num_classifiers(self) -> int:
        return len(self.classifiers)


def make_partitions(
    classes: set[int], num_partitions: int, novel_fraction: float, seed: int
) -> list[Partition]:
    """Randomly mark ~novel_fraction of the classes as novel, `num_partitions` times.

    Seeded permutations of the class list are concatenated and chunked into
    groups of m = max(1, round(novel_fraction * |C|)); each group becomes one
    partition's presumed-novel set, so per-class presumed-novel counts differ
    by at most one. A permutation whose head would duplicate a class inside
    the chunk spanning the splice is redrawn.
    """
    class_list = sorted(classes)
    c = len(class_list)
    if num_partitions < 1:
        raise ValueError("num_partitions must be positive")
    if not 0.0 < novel_fraction < 1.0:
        raise ValueError("novel_fraction must be in (0, 1)")
    m = max(1, int(np.floor(novel_fraction * c + 0.5)))
    if m >= c - 1:
        raise ValueError(
            f"novel_fraction {novel_fraction} marks {m} of {c} classes novel; "
            "at least two must stay presumed-known"
        )
    rng = np.random.default_rng(seed)
    need = num_partitions * m
    slots: list[int] = []
    while len(slots) < need:
        pending = slots[(len(slots) // m) * m :]
        head_len = (m - len(pending)) % m
        for _ in range(1000):
            perm = [class_list[i] for i in rng.permutation(c)]
            if head_len == 0 or not set(perm[:head_len]) & set(pending):
                break
        else:  # unreachable for m < c: a disjoint head always exists
            raise RuntimeError("failed to draw a duplicate-free class layout")
        slots.extend(perm)
    slots = slots[:need]
    universe = frozenset(class_list)
    partitions = []
    for l in range(num_partitions):
        novel = frozenset(slots[l * m : (l + 1) * m])
        partitions.append(
            Partition(index=l, presumed_known=universe - novel, presumed_novel=novel)
        )
    return partitions


def represent_partition(
    partition: Partition,
    multiclass_train: LabeledDataset,
    binary_train: LabeledDataset,
    cfg: TrainConfig,
) -> tuple[SoftLabelModel, dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Train the partition's multiclass model and map held-out examples through it.

    Returns (model over the presumed-known classes, confidences of binary_train
    examples from presumed-known classes grouped by global class index,
    same for presumed-novel classes).
    """
    classes = multiclass_train.classes()
    for idx in partition.presumed_known | partition.presumed_novel:
        if idx >= len(classes):
            raise ValueError(f"partition references unknown class index {idx}")
    known_labels = {classes[i] for i in partition.presumed_known}
    missing = known_labels - set(multiclass_train.labels)
    if missing:
        raise ValueError(f"presumed-known classes without training examples: {sorted(missing)}")
    model = train_softmax(multiclass_train.restrict_to_classes(known_labels), cfg)
    probs = predict_confidence_matrix(model, binary_train.features)
    z_known: dict[int, np.ndarray] = {}
    z_novel: dict[int, np.ndarray] = {}
    for lab in binary_train.classes():
        gidx = binary_train.class_index[lab]
        rows = binary_train.rows_of_class(lab)
        if gidx in partition.presumed_known:
            z_known[gidx] = probs[rows]
        else:
            z_novel[gidx] = probs[rows]
    return model, z_known, z_novel


def build_training_pairs(
    z_known: dict[int, np.ndarray],
    z_novel: dict[int, np.ndarray],
    partition_model: SoftLabelModel,
    theta_table: dict[int, float],
    class_index: dict[str, int],
    s: int,
    seed: int,
) -> tuple[list[ScorePair], list[ScorePair]]:
    """Chunk each class into disjoint size-s subsets and score them.

    Per class: seeded shuffle, floor(n/s) subsets, remainder dropped. Each
    subset yields (set score, calibration score of its predicted class).
    Subsets of presumed-novel classes form the positive (novel) list, subsets
    of presumed-known classes the negative (known) list.
    """
    if s < 1:
        raise ValueError("set size must be positive")
    rng = np.random.default_rng(seed)
    local_classes = partition_model.classes()

    def pairs_from(groups: dict[int, np.ndarray]) -> list[ScorePair]:
        out = []
        for gidx in sorted(groups):
            mat = groups[gidx]
            order = rng.permutation(mat.shape[0])
            for t in range(mat.shape[0] // s):
                subset = mat[order[t * s : (t + 1) * s]]
                o_hat = class_index[local_classes[predicted_assignment(subset)]]
                out.append(ScorePair(raw_novelty_score(subset), theta_table[o_hat]))
        return out

    psi_novel = pairs_from(z_novel)
    psi_known = pairs_from(z_known)
    if not psi_novel and not psi_known:
        raise ValueError(f"no class yields a subset of size {s}")
    return psi_novel, psi_known


def train_linear_svm(
    psi_novel: list[ScorePair],
    psi_known: list[ScorePair],
    c_reg: float = 1.0,
    seed: int = 0,
    iterations: int = 2000,
) -> tuple[np.ndarray, float, Standardizer]:
    """Fit the 2-D novel-vs-known separator by deterministic subgradient descent.

    Features are z-scored with statistics of the union; the hinge loss is
    class-balanced (each class contributes total weight 1/2) because novel
    pairs are typically far scarcer than known pairs. The positive class is
    novel. Returns the best iterate by objective value; `seed` is accepted
    for interface symmetry but the optimization is deterministic.
    """
    del seed
    if c_reg <= 0:
        raise ValueError("c_reg must be positive")
    if not psi_novel or not psi_known:
        raise ValueError("both score-pair lists must be non-empty")
    X = np.array(
        [[p.theta_set, p.theta_class] for p in psi_novel]
        + [[p.theta_set, p.theta_class] for p in psi_known]
    )
    y = np.concatenate([np.ones(len(psi_novel)), -np.ones(len(psi_known))])
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    if (std <= 0).all():
        raise ValueError("degenerate features: zero variance in both coordinates")
    std = np.where(std <= 0, 1.0, std)
    Z = (X - mean) / std
    weights = np.where(y > 0, 0.5 / len(psi_novel), 0.5 / len(psi_known))
    lam = 1.0 / c_reg

    def objective(w, b):
        margins = y * (Z @ w + b)
        return 0.5 * lam * float(w @ w) + float(
            (weights * np.maximum(0.0, 1.0 - margins)).sum()
        )

    w = np.zeros(2)
    b = 0.0
    best_obj, best_w, best_b = objective(w, b), w.copy(), b
    for t in range(iterations):
        margins = y * (Z @ w + b)
        active = margins < 1.0
        wy = weights * y
        grad_w = lam * w - wy[active] @ Z[active]
        grad_b = -float(wy[active].sum())
        eta = 1.0 / (lam * (t + 1))
        w = w - eta * grad_w
        b = b - eta * grad_b
        obj = objective(w, b)
        if obj < best_obj:
            best_obj, best_w, best_b = obj, w.copy(), b
    return best_w, float(best_b), Standardizer(mean=mean, std=std)


def train_ensemble_multi(
    multiclass_train: LabeledDataset,
    binary_train: LabeledDataset,
    num_partitions: int,
    novel_fraction: float,
    set_sizes: tuple[int, ...],
    cfg: TrainConfig,
    svm_c: float = 1.0,
    seed: int = 0,
    global_cfg: TrainConfig | None = None,
) -> dict[int, EnsembleModel]:
    """Train one ensemble per requested set size, sharing the partition models.

    The partition layout, the per-partition multiclass models, and the
    calibration tables do not depend on the set size; only the score pairs
    and the linear separators do. Seeds are derived per (partition, set size)
    so `train_ensemble(s)` reproduces `train_ensemble_multi((s, ...))[s]`.
    `global_cfg` lets the global assignment model train under different
    hyperparameters than the per-partition feature models (default: same).
    """
    if multiclass_train.class_index != binary_train.class_index:
        raise ValueError("multiclass_train and binary_train must share a class_index")
    if not set_sizes:
        raise ValueError("need at least one set size")
    class_index = multiclass_train.class_index
    partitions = make_partitions(
        set(class_index.values()), num_partitions, novel_fraction, child_seed(seed, 0)
    )
    global_model = train_softmax(multiclass_train, global_cfg or cfg)
    per_size: dict[int, list[BinaryNoveltyClassifier]] = {s: [] for s in set_sizes}
    for part in partitions:
        try:
            model, z_known, z_novel = represent_partition(
                part, multiclass_train, binary_train, cfg
            )
            theta_table = {g: raw_novelty_score(z_known[g]) for g in sorted(z_known)}
            if set(theta_table) != set(part.presumed_known):
                raise ValueError("binary_train lacks examples of a presumed-known class")
            for s in set_sizes:
                psi_novel, psi_known = build_training_pairs(
                    z_known,
                    z_novel,
                    model,
                    theta_table,
                    class_index,
                    s,
                    child_seed(seed, 1, part.index, s),
                )
                w, b, standardizer = train_linear_svm(
                    psi_novel, psi_known, svm_c, child_seed(seed, 2, part.index, s)
                )
                per_size[s].append(
                    BinaryNoveltyClassifier(
                        partition=part,
                        partition_model=model,
                        theta_table=theta_table,
                        w=w,
                        b=b,
                        standardizer=standardizer,
                    )
                )
        except Exception as exc:
            raise type(exc)(f"partition {part.index}: {exc}") from exc
    return {
        s: EnsembleModel(
            global_model=global_model, classifiers=tuple(per_size[s]), set_size=s
        )
        for s in set_sizes
    }


def train_ensemble(
    multiclass_train: LabeledDataset,
    binary_train: LabeledDataset,
    num_partitions: int = 30,
    novel_fraction: float = 0.1,
    set_size: int = 1,
    cfg: TrainConfig = TrainConfig(),
    svm_c: float = 1.0,
    seed: int = 0,
    global_cfg: TrainConfig | None = None,
) -> EnsembleModel:
    """End-to-end ensemble training for one set size."""
    return train_ensemble_multi(
        multiclass_train,
        binary_train,
        num_partitions,
        novel_fraction,
        (set_size,),
        cfg,
        svm_c,
        seed,
        global_cfg,
    )[set_size]


def score_sets(
    ensemble: EnsembleModel,
    sets: list[np.ndarray],
    normalized: bool = False,
) -> np.ndarray:
    """Vote-count novelty score for each feature set (rows of one set share a label).

    For each set: the globally predicted class selects the eligible
    classifiers (those that presumed it known); each eligible classifier
    votes on the standardized (set score, calibration score) pair. The raw
    score is the novel-vote count in [0, L]; with `normalized`, the count is
    divided by the number of eligible classifiers (0 when none are eligible).
    """
    mats = []
    bounds = [0]
    for S in sets:
        S = np.asarray(S, dtype=np.float64)
        if S.ndim == 1:
            S = S[None, :]
        if S.ndim != 2 or S.shape[1] != ensemble.global_model.dim:
            raise ValueError(f"expected sets of shape (s, {ensemble.global_model.dim})")
        mats.append(S)
        bounds.append(bounds[-1] + S.shape[0])
    if not mats:
        return np.zeros(0)
    stacked = np.vstack(mats)
    global_probs = predict_confidence_matrix(ensemble.global_model, stacked)
    sub_probs = [
        predict_confidence_matrix(clf.partition_model, stacked)
        for clf in ensemble.classifiers
    ]
    scores = np.zeros(len(mats))
    for i in range(len(mats)):
        lo, hi = bounds[i], bounds[i + 1]
        o_hat = predicted_assignment(global_probs[lo:hi])
        votes = 0
        eligible = 0
        for clf, probs in zip(ensemble.classifiers, sub_probs):
            if o_hat not in clf.partition.presumed_known:
                continue
            eligible += 1
            if clf.vote(raw_novelty_score(probs[lo:hi]), o_hat):
                votes += 1
        if normalized:
            scores[i] = votes / eligible if eligible else 0.0
        else:
            scores[i] = votes
    return scores


def ensemble_novelty_score(
    ensemble: EnsembleModel, S: np.ndarray, normalized: bool = False
):
    """Novelty score of a single feature set; integer vote count unless normalized."""
    value = score_sets(ensemble, [S], normalized=normalized)[0]
    return float(value) if normalized else int(value)


def save_ensemble(ensemble: EnsembleModel, dirpath: str) -> None:
    """Write the ensemble as a directory of flat text files (see README)."""
    os.makedirs(dirpath, exist_ok=True)
    save_softlabel(ensemble.global_model, os.path.join(dirpath, "global.model"))
    classes = ensemble.global_model.classes()
    with open(os.path.join(dirpath, "ensemble.meta"), "w", encoding="utf-8") as fh:
        fh.write(f"set_size,{ensemble.set_size}\n")
        fh.write(f"partitions,{ensemble.num_classifiers}\n")
    for l, clf in enumerate(ensemble.classifiers):
        save_softlabel(
            clf.partition_model, os.path.join(dirpath, f"partition_{l:03d}.model")
        )
        with open(
            os.path.join(dirpath, f"partition_{l:03d}.meta"), "w", encoding="utf-8"
        ) as fh:
            for g in sorted(clf.partition.presumed_known):
                fh.write(f"known,{classes[g]}\n")
            for g in sorted(clf.partition.presumed_novel):
                fh.write(f"novel,{classes[g]}\n")
            for g in sorted(clf.theta_table):
                fh.write(f"theta,{classes[g]},{FLOAT_FORMAT % clf.theta_table[g]}\n")
            fh.write(f"weight,0,{FLOAT_FORMAT % clf.w[0]}\n")
            fh.write(f"weight,1,{FLOAT_FORMAT % clf.w[1]}\n")
            fh.write(f"bias,{FLOAT_FORMAT % clf.b}\n")
            for j in range(2):
                fh.write(f"standardizer_mean,{j},{FLOAT_FORMAT % clf.standardizer.mean[j]}\n")
            for j in range(2):
                fh.write(f"standardizer_std,{j},{FLOAT_FORMAT % clf.standardizer.std[j]}\n")


def load_ensemble(dirpath: str) -> EnsembleModel:
    global_model = load_softlabel(os.path.join(dirpath, "global.model"))
    class_index = global_model.class_index
    meta: dict[str, int] = {}
    with open(os.path.join(dirpath, "ensemble.meta"), "r", encoding="utf-8") as fh:
        for line in fh:
            key, value = line.strip().split(",")
            meta[key] = int(value)
    classifiers = []
    for l in range(meta["partitions"]):
        model = load_softlabel(os.path.join(dirpath, f"partition_{l:03d}.model"))
        known: set[int] = set()
        novel: set[int] = set()
        theta_table: dict[int, float] = {}
        w = np.zeros(2)
        b = 0.0
        mean = np.zeros(2)
        std = np.ones(2)
        with open(
            os.path.join(dirpath, f"partition_{l:03d}.meta"), "r", encoding="utf-8"
        ) as fh:
            for line in fh:
                kind, rest = line.rstrip("\n").split(",", 1)
                if kind == "known":
                    known.add(class_index[rest])
                elif kind == "novel":
                    novel.add(class_index[rest])
                elif kind == "theta":
                    lab, value = rest.rsplit(",", 1)
                    theta_table[class_index[lab]] = float(value)
                elif kind == "weight":
                    j, value = rest.split(",")
                    w[int(j)] = float(value)
                elif kind == "bias":
                    b = float(rest)
                elif kind == "standardizer_mean":
                    j, value = rest.split(",")
                    mean[int(j)] = float(value)
                elif kind == "standardizer_std":
                    j, value = rest.split(",")
                    std[int(j)] = float(value)
                else:
                    raise ValueError(f"unknown record {kind!r} in partition meta")
        classifiers.append(
            BinaryNoveltyClassifier(
                partition=Partition(
                    index=l, presumed_known=frozenset(known), presumed_novel=frozenset(novel)
                ),
                partition_model=model,
                theta_table=theta_table,
                w=w,
                b=b,
                standardizer=Standardizer(mean=mean, std=std),
            )
        )
    return EnsembleModel(
        global_model=global_model,
        classifiers=tuple(classifiers),
        set_size=meta["set_size"],
    )
