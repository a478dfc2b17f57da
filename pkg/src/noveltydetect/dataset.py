"""Dataset ingestion, per-class splitting, synthetic generation, and PCA."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LabeledDataset",
    "SplitSpec",
    "SynthSpec",
    "PcaModel",
    "CsvFormatError",
    "load_csv",
    "save_csv",
    "split_per_class",
    "generate_synthetic",
    "fit_pca",
    "apply_pca",
]

FLOAT_FORMAT = "%.17g"  # round-trips float64 exactly


class CsvFormatError(ValueError):
    """Malformed dataset CSV; message carries the offending line number."""


@dataclass(frozen=True)
class LabeledDataset:
    """Feature vectors with class labels.

    features : (N, d) float64 array, read-only.
    labels   : length-N tuple of class identifiers (opaque strings).
    class_index : bijection identifier -> contiguous index in [0, k).
    """

    features: np.ndarray
    labels: tuple[str, ...]
    class_index: dict[str, int]

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        n, d = feats.shape
        if n < 1 or d < 1:
            raise ValueError(f"need N >= 1 and d >= 1, got N={n}, d={d}")
        if len(self.labels) != n:
            raise ValueError(f"{len(self.labels)} labels for {n} rows")
        present = set(self.labels)
        missing = present - self.class_index.keys()
        if missing:
            raise ValueError(f"labels not in class_index: {sorted(missing)}")
        empty = self.class_index.keys() - present
        if empty:
            raise ValueError(f"classes with no examples: {sorted(empty)}")
        if sorted(self.class_index.values()) != list(range(len(self.class_index))):
            raise ValueError("class_index values must be a bijection onto [0, k)")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_index)

    def label_indices(self) -> np.ndarray:
        """Per-row class indices as an int array."""
        return np.fromiter(
            (self.class_index[lab] for lab in self.labels), dtype=np.int64, count=self.n
        )

    def classes(self) -> list[str]:
        """Class identifiers ordered by their index."""
        out = [""] * self.num_classes
        for lab, idx in self.class_index.items():
            out[idx] = lab
        return out

    def rows_of_class(self, label: str) -> np.ndarray:
        """Row positions of every example with the given label."""
        return np.array([i for i, lab in enumerate(self.labels) if lab == label])

    def take(self, rows: np.ndarray, reindex: bool = False) -> "LabeledDataset":
        """Subset by row positions. With reindex, rebuild class_index by first appearance."""
        labels = tuple(self.labels[i] for i in rows)
        index = _first_appearance_index(labels) if reindex else dict(self.class_index)
        return LabeledDataset(self.features[np.asarray(rows)], labels, index)

    def restrict_to_classes(self, keep: set[str]) -> "LabeledDataset":
        """Examples whose label is in `keep`, with a fresh first-appearance class_index."""
        rows = np.array([i for i, lab in enumerate(self.labels) if lab in keep])
        if rows.size == 0:
            raise ValueError("restriction keeps no examples")
        return self.take(rows, reindex=True)


def _first_appearance_index(labels) -> dict[str, int]:
    index: dict[str, int] = {}
    for lab in labels:
        if lab not in index:
            index[lab] = len(index)
    return index


def merge_datasets(a: LabeledDataset, b: LabeledDataset) -> LabeledDataset:
    """Stack two datasets; class_index assigned by first appearance in (a, b) order."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    labels = a.labels + b.labels
    return LabeledDataset(
        np.vstack([a.features, b.features]), labels, _first_appearance_index(labels)
    )


@dataclass(frozen=True)
class SplitSpec:
    """Three-way per-class split: multiclass train / binary train / test."""

    multiclass_fraction: float
    binary_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.multiclass_fraction < 1.0:
            raise ValueError("multiclass_fraction must be in (0, 1)")
        if not 0.0 < self.binary_fraction < 1.0:
            raise ValueError("binary_fraction must be in (0, 1)")
        if self.multiclass_fraction + self.binary_fraction > 1.0:
            raise ValueError("fractions must sum to at most 1")


@dataclass(frozen=True)
class SynthSpec:
    """Isotropic Gaussian-per-class synthetic data."""

    num_classes: int
    dim: int
    examples_per_class: int
    center_spread: float
    within_std: float
    seed: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.dim < 1 or self.examples_per_class < 1:
            raise ValueError("dim and examples_per_class must be positive")
        if self.center_spread <= 0 or self.within_std <= 0:
            raise ValueError("center_spread and within_std must be positive")


@dataclass(frozen=True)
class PcaModel:
    """Mean vector plus d x m orthonormal component matrix."""

    mean: np.ndarray
    components: np.ndarray

    @property
    def m(self) -> int:
        return self.components.shape[1]


def load_csv(path: str) -> LabeledDataset:
    """Read a dataset CSV with header ``label,f0,...,f{d-1}``.

    Rows keep file order; class_index assigns indices by first appearance.
    Raises CsvFormatError naming the offending line on any malformed content.
    """
    if not os.path.isfile(path):
        raise CsvFormatError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError(f"{path}: empty file (line 1: missing header)")
    header = lines[0].split(",")
    if header[0] != "label" or len(header) < 2:
        raise CsvFormatError(f"{path}: line 1: header must be 'label,f0,...'")
    for j, name in enumerate(header[1:]):
        if name != f"f{j}":
            raise CsvFormatError(f"{path}: line 1: expected column f{j}, got {name!r}")
    d = len(header) - 1
    body = [(i + 2, line) for i, line in enumerate(lines[1:]) if line.strip() != ""]
    if not body:
        raise CsvFormatError(f"{path}: line 2: empty body")
    labels = []
    rows = np.empty((len(body), d))
    for r, (lineno, line) in enumerate(body):
        cells = line.split(",")
        if len(cells) != d + 1:
            raise CsvFormatError(
                f"{path}: line {lineno}: expected {d + 1} fields, got {len(cells)}"
            )
        labels.append(cells[0])
        for j, cell in enumerate(cells[1:]):
            try:
                rows[r, j] = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: line {lineno}: non-numeric feature value {cell!r}"
                ) from None
    return LabeledDataset(rows, tuple(labels), _first_appearance_index(labels))


def save_csv(ds: LabeledDataset, path: str) -> None:
    """Write a dataset in the load_csv format (17 significant digits)."""
    if any("," in lab or "\n" in lab for lab in ds.class_index):
        raise ValueError("labels must not contain commas or newlines")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label," + ",".join(f"f{j}" for j in range(ds.dim)) + "\n")
        for lab, row in zip(ds.labels, ds.features):
            fh.write(lab + "," + ",".join(FLOAT_FORMAT % v for v in row) + "\n")


def split_per_class(
    ds: LabeledDataset, spec: SplitSpec
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Split every class into (multiclass_train, binary_train, test).

    Within each class: seeded shuffle, then floor(n * fraction) examples to the
    first two parts and the remainder to test. Every part must get at least one
    example from every class; the three parts are disjoint and their union is ds.
    """
    rng = np.random.default_rng(spec.seed)
    part_rows: tuple[list[int], list[int], list[int]] = ([], [], [])
    for lab in ds.classes():
        rows = ds.rows_of_class(lab)
        order = rows[rng.permutation(rows.size)]
        n_mc = int(rows.size * spec.multiclass_fraction)
        n_bin = int(rows.size * spec.binary_fraction)
        n_test = rows.size - n_mc - n_bin
        if min(n_mc, n_bin, n_test) < 1:
            raise ValueError(
                f"class {lab!r} has {rows.size} examples; split "
                f"{n_mc}/{n_bin}/{n_test} leaves a part empty"
            )
        part_rows[0].extend(order[:n_mc])
        part_rows[1].extend(order[n_mc : n_mc + n_bin])
        part_rows[2].extend(order[n_mc + n_bin :])
    return tuple(ds.take(np.sort(np.array(rows))) for rows in part_rows)


def generate_synthetic(spec: SynthSpec) -> LabeledDataset:
    """Draw class centers N(0, center_spread^2 I), then examples N(center, within_std^2 I)."""
    rng = np.random.default_rng(spec.seed)
    centers = rng.normal(0.0, spec.center_spread, size=(spec.num_classes, spec.dim))
    feats = np.empty((spec.num_classes * spec.examples_per_class, spec.dim))
    labels = []
    for c in range(spec.num_classes):
        lo = c * spec.examples_per_class
        feats[lo : lo + spec.examples_per_class] = centers[c] + rng.normal(
            0.0, spec.within_std, size=(spec.examples_per_class, spec.dim)
        )
        labels.extend([f"c{c:02d}"] * spec.examples_per_class)
    return LabeledDataset(feats, tuple(labels), _first_appearance_index(labels))


def fit_pca(ds: LabeledDataset, m: int) -> PcaModel:
    """Top-m principal components of the sample covariance.

    Components are ordered by descending eigenvalue, each with its
    largest-magnitude entry made positive so results are reproducible.
    """
    n, d = ds.features.shape
    if not 1 <= m <= min(n, d):
        raise ValueError(f"m must be in [1, min(N, d)] = [1, {min(n, d)}], got {m}")
    mean = ds.features.mean(axis=0)
    centered = ds.features - mean
    if n > 1:
        cov = centered.T @ centered / (n - 1)
    else:
        cov = np.zeros((d, d))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:m]
    comps = eigvecs[:, order]
    for j in range(m):
        if comps[np.argmax(np.abs(comps[:, j])), j] < 0:
            comps[:, j] = -comps[:, j]
    return PcaModel(mean=mean, components=comps)


def apply_pca(model: PcaModel, ds: LabeledDataset) -> LabeledDataset:
    """Subtract the fitted mean and project onto the components."""
    if ds.dim != model.mean.shape[0]:
        raise ValueError(f"dimension mismatch: data {ds.dim}, model {model.mean.shape[0]}")
    projected = (ds.features - model.mean) @ model.components
    return LabeledDataset(projected, ds.labels, dict(ds.class_index))
