"""Comparison novelty detectors sharing one convention: higher = more novel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .rawscore import raw_novelty_score
from .softlabel import SoftLabelModel, predict_confidence_matrix

__all__ = [
    "OcsvmModel",
    "KnnIndex",
    "KnfstModel",
    "KernelSpec",
    "ConvergenceError",
    "NullSpaceError",
    "default_rbf_gamma",
    "kernel_matrix",
    "ocsvm_train",
    "ocsvm_decision",
    "ocsvm_score",
    "knn_novelty_score",
    "max_confidence_score",
    "simple_threshold_score",
    "knfst_train",
    "knfst_project",
    "knfst_score",
]


class ConvergenceError(RuntimeError):
    """Dual solver hit its iteration cap before reaching the KKT tolerance."""


class NullSpaceError(RuntimeError):
    """The within-class null space is empty or numerically unusable."""


def _as_set(S: np.ndarray, d: int) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim == 1:
        S = S[None, :]
    if S.ndim != 2 or S.shape[1] != d:
        raise ValueError(f"expected a set of shape (s, {d}), got {S.shape}")
    return S


def default_rbf_gamma(X: np.ndarray) -> float:
    """1 / (d * median pairwise squared distance), on a deterministic subsample."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n > 512:
        X = X[:: int(np.ceil(n / 512))]
    diff = X[:, None, :] - X[None, :, :]
    sq = (diff * diff).sum(axis=2)
    med = float(np.median(sq[np.triu_indices(X.shape[0], k=1)])) if X.shape[0] > 1 else 0.0
    if med <= 0.0:
        med = 1.0
    return 1.0 / (d * med)


# ---------------------------------------------------------------------------
# one-class SVM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OcsvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float
    n_train: int

    def __post_init__(self):
        cap = 1.0 / (self.nu * self.n_train)
        if abs(self.alphas.sum() - 1.0) > 1e-6:
            raise ValueError("dual variables must sum to 1")
        if (self.alphas < -1e-9).any() or (self.alphas > cap + 1e-9).any():
            raise ValueError("dual variables outside [0, 1/(nu*n)]")


def _rbf(gamma: float, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def ocsvm_train(
    X: np.ndarray,
    nu: float = 0.5,
    gamma: float | None = None,
    tol: float = 1e-4,
    max_iter: int | None = None,
) -> OcsvmModel:
    """Solve the one-class dual min 1/2 a'Ka s.t. sum(a)=1, 0 <= a_i <= 1/(nu*n).

    Pairwise coordinate updates: each step moves mass between the worst
    KKT-violating pair, preserving the sum, until the maximum violation is
    at most `tol`. The offset rho is the mean decision value over margin
    support vectors. Gaussian kernel; `gamma=None` uses the median heuristic.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 training points")
    if not np.isfinite(X).all():
        raise ValueError("non-finite training features")
    n = X.shape[0]
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must be in (0, 1]")
    if nu * n < 1.0:
        raise ValueError(f"nu*n = {nu * n:.3g} < 1: the dual is degenerate")
    if gamma is None:
        gamma = default_rbf_gamma(X)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    K = _rbf(gamma, X, X)
    cap = 1.0 / (nu * n)

    alpha = np.zeros(n)
    full = int(np.floor(nu * n))
    alpha[:full] = cap
    if full < n:
        alpha[full] = 1.0 - cap * full
    grad = K @ alpha  # gradient of the dual objective

    if max_iter is None:
        max_iter = 100 * n + 10_000
    eps = 1e-12
    for _ in range(max_iter):
        can_up = alpha < cap - eps
        can_down = alpha > eps
        i = int(np.where(can_up, grad, np.inf).argmin())
        j = int(np.where(can_down, grad, -np.inf).argmax())
        violation = grad[j] - grad[i]
        if violation <= tol:
            break
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        step = min(violation / quad, cap - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (K[:, i] - K[:, j])
    else:
        raise ConvergenceError(
            f"one-class dual not converged after {max_iter} iterations "
            f"(KKT residual {violation:.3g} > tol {tol:.3g})"
        )

    margin = (alpha > cap * 1e-6) & (alpha < cap * (1.0 - 1e-6))
    if margin.any():
        rho = float(grad[margin].mean())
    else:
        at_cap = alpha >= cap * (1.0 - 1e-6)
        at_zero = alpha <= cap * 1e-6
        lo = float(grad[at_cap].max()) if at_cap.any() else -np.inf
        hi = float(grad[at_zero].min()) if at_zero.any() else np.inf
        if np.isfinite(lo) and np.isfinite(hi):
            rho = 0.5 * (lo + hi)
        else:
            rho = lo if np.isfinite(lo) else hi
    keep = alpha > 0.0
    return OcsvmModel(
        support_vectors=X[keep],
        alphas=alpha[keep],
        rho=rho,
        gamma=gamma,
        nu=nu,
        n_train=n,
    )


def ocsvm_decision(model: OcsvmModel, X: np.ndarray) -> np.ndarray:
    """Margin values g(x) = sum_i a_i k(x_i, x) - rho for each row of X."""
    X = _as_set(X, model.support_vectors.shape[1])
    return model.alphas @ _rbf(model.gamma, model.support_vectors, X) - model.rho


def ocsvm_score(model: OcsvmModel, S: np.ndarray) -> float:
    """Negated mean margin of the set: higher = more novel."""
    return float(-ocsvm_decision(model, S).mean())


# ---------------------------------------------------------------------------
# k-NN distance-ratio score
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KnnIndex:
    points: np.ndarray
    k: int

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2:
            raise ValueError("points must be a 2-D array")
        if not 1 <= self.k < points.shape[0]:
            raise ValueError("need 1 <= k < number of points")
        object.__setattr__(self, "points", points)


def knn_novelty_score(index: KnnIndex, S: np.ndarray) -> float:
    """Distance of each point to its k nearest training points, divided by the
    same quantity for its single nearest neighbor (self excluded); set score
    is the mean over the points.

    Distance ties resolve toward the lowest training-point index. The
    denominator is floored at 1e-12 so a duplicated training point cannot
    divide by zero.
    """
    S = _as_set(S, index.points.shape[1])
    train = index.points
    k = index.k
    scores = np.empty(S.shape[0])
    for r in range(S.shape[0]):
        d = np.sqrt(((train - S[r]) ** 2).sum(axis=1))
        nearest = np.argsort(d, kind="stable")[:k]
        numerator = d[nearest].mean()
        anchor = int(nearest[0])
        da = np.sqrt(((train - train[anchor]) ** 2).sum(axis=1))
        da[anchor] = np.inf  # exclude the anchor itself
        denominator = da[np.argsort(da, kind="stable")[:k]].mean()
        scores[r] = numerator / max(denominator, 1e-12)
    return float(scores.mean())


# ---------------------------------------------------------------------------
# confidence-based baselines
# ---------------------------------------------------------------------------


def max_confidence_score(model: SoftLabelModel, S: np.ndarray) -> float:
    """Negated maximum of the set's mean confidence vector."""
    probs = predict_confidence_matrix(model, _as_set(S, model.dim))
    return float(-probs.mean(axis=0).max())


def simple_threshold_score(model: SoftLabelModel, S: np.ndarray) -> float:
    """Negated confidence-ratio score of the set (no learned comparison)."""
    probs = predict_confidence_matrix(model, _as_set(S, model.dim))
    return -raw_novelty_score(probs)


# ---------------------------------------------------------------------------
# kernel null-space method
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"  # rbf | linear | poly
    gamma: float | None = None
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear", "poly"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "poly" and self.degree < 1:
            raise ValueError("poly degree must be >= 1")


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "poly":
        return (A @ B.T + spec.coef0) ** spec.degree
    if spec.gamma is None:
        raise ValueError("rbf kernel needs gamma resolved before evaluation")
    return _rbf(spec.gamma, A, B)


@dataclass(frozen=True)
class KnfstModel:
    training_points: np.ndarray
    projection: np.ndarray  # (n, q): null-space coords of x are k(X, x)' @ projection
    class_targets: np.ndarray  # (c, q)
    target_labels: tuple[str, ...]
    kernel: KernelSpec
    kernel_scale: float


def _knfst_auto_gamma(ds: LabeledDataset) -> float:
    """Smallest power-of-two multiple of the median heuristic whose kernel
    keeps numerical rank above n - c, so the within-class null space exists."""
    gamma = default_rbf_gamma(ds.features)
    need = ds.n - ds.num_classes + 1
    for _ in range(40):
        K = _rbf(gamma, ds.features, ds.features)
        eigvals = np.linalg.eigvalsh(K / np.abs(K).max())
        if int((eigvals > 1e-9 * eigvals[-1]).sum()) >= need:
            return gamma
        gamma *= 2.0
    return gamma


def knfst_train(
    ds: LabeledDataset, kernel: KernelSpec = KernelSpec(), max_points: int = 2000
) -> KnfstModel:
    """Project classes onto the null space of their within-class scatter.

    The kernel matrix (scaled by its largest absolute entry for conditioning)
    is eigendecomposed to get an orthonormal basis of its range (eigenvalues
    above 1e-9 of the largest); the within-class scatter in that basis is
    eigendecomposed and directions below 1e-9 of the total scatter's largest
    eigenvalue form the null space, where every class collapses to a single
    target point.
    """
    if ds.num_classes < 2:
        raise ValueError("need at least 2 classes")
    if ds.n > max_points:
        raise ValueError(f"{ds.n} points exceed the dense-eigendecomposition cap {max_points}")
    spec = kernel
    if spec.kind == "rbf" and spec.gamma is None:
        spec = KernelSpec(kind="rbf", gamma=_knfst_auto_gamma(ds))
    K = kernel_matrix(spec, ds.features, ds.features)
    scale = float(np.abs(K).max())
    if scale <= 0.0:
        raise NullSpaceError("kernel matrix is identically zero")
    K = K / scale

    eigvals, eigvecs = np.linalg.eigh(K)
    keep = eigvals > 1e-9 * eigvals[-1]
    if not keep.any():
        raise NullSpaceError("kernel matrix has no usable range")
    basis = eigvecs[:, keep] / np.sqrt(eigvals[keep])
    coords = eigvecs[:, keep] * np.sqrt(eigvals[keep])  # training points in the basis

    centered = coords.copy()
    label_rows = {lab: ds.rows_of_class(lab) for lab in ds.classes()}
    for rows in label_rows.values():
        centered[rows] -= coords[rows].mean(axis=0)
    within = centered.T @ centered
    total = coords - coords.mean(axis=0)
    total_max = float(np.linalg.eigvalsh(total.T @ total)[-1])
    if total_max <= 0.0:
        raise NullSpaceError("total scatter is zero: all points identical")
    omega, directions = np.linalg.eigh(within)
    null = omega < 1e-9 * total_max
    if not null.any():
        raise NullSpaceError(
            "within-class null space is empty: more independent within-class "
            "directions than dimensions"
        )
    projection = basis @ directions[:, null]

    projected = K @ projection
    labels = ds.classes()
    targets = np.vstack([projected[label_rows[lab]].mean(axis=0) for lab in labels])
    spread = 0.0
    for i, lab in enumerate(labels):
        dev = np.linalg.norm(projected[label_rows[lab]] - targets[i], axis=1).max()
        spread = max(spread, float(dev))
    if spread > 1e-6:
        raise NullSpaceError(
            f"training points stray {spread:.2e} from their class targets; "
            "kernel matrix too ill-conditioned"
        )
    return KnfstModel(
        training_points=ds.features,
        projection=projection,
        class_targets=targets,
        target_labels=tuple(labels),
        kernel=spec,
        kernel_scale=scale,
    )


def knfst_project(model: KnfstModel, X: np.ndarray) -> np.ndarray:
    """Null-space coordinates for each row of X."""
    X = _as_set(X, model.training_points.shape[1])
    K = kernel_matrix(model.kernel, X, model.training_points) / model.kernel_scale
    return K @ model.projection


def knfst_score(model: KnfstModel, S: np.ndarray) -> float:
    """Mean over the set of the distance to the nearest class target."""
    coords = knfst_project(model, S)
    diff = coords[:, None, :] - model.class_targets[None, :, :]
    dists = np.sqrt((diff * diff).sum(axis=2))
    return float(dists.min(axis=1).mean())
