"""Executable analysis of the voting ensemble.

Chernoff tail bounds for the vote count, a Monte-Carlo simulator that makes
the conditional-independence assumption behind them literal, and diagnostics
that measure how well a trained ensemble's score distributions support the
two working requirements: the confidence-ratio score must separate known
from novel material (direction check), and artificially-novel material must
look like truly novel material (similarity check).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._seeds import child_seed
from .dataset import LabeledDataset
from .ensemble import EnsembleModel, score_sets
from .evaluate import ScoredSet, auc, roc_curve, sample_test_sets
from .rawscore import predicted_assignment, raw_novelty_score
from .softlabel import predict_confidence_matrix

__all__ = [
    "VoteRates",
    "VoteSimulation",
    "DiagnosticsRecord",
    "chernoff_upper_bounds",
    "simulate_vote_distribution",
    "two_sample_ks",
    "requirement_diagnostics",
    "write_theta_scatter",
    "chernoff_report_rows",
    "write_chernoff_report",
]


@dataclass(frozen=True)
class VoteRates:
    """Per-classifier Bernoulli vote rates.

    p[l] is the chance classifier l votes novel on novel input, q[l] the
    chance it votes novel on known input. novel_assignment[l] marks the
    evaluated known class as presumed-novel in partition l, in which case
    that classifier fires at rate p[l] even on the known input.
    """

    p: np.ndarray
    q: np.ndarray
    novel_assignment: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        q = np.asarray(self.q, dtype=np.float64)
        if p.shape != q.shape or p.ndim != 1 or p.size < 1:
            raise ValueError("p and q must be equal-length vectors")
        if (p <= 0).any() or (p > 1).any():
            raise ValueError("p entries must lie in (0, 1]")
        if (q < 0).any() or (q >= 1).any():
            raise ValueError("q entries must lie in [0, 1)")
        flags = self.novel_assignment
        flags = np.zeros(p.size, dtype=bool) if flags is None else np.asarray(flags, bool)
        if flags.shape != p.shape:
            raise ValueError("novel_assignment must match p in length")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "novel_assignment", flags)

    @property
    def num_classifiers(self) -> int:
        return self.p.size

    @property
    def mu_novel(self) -> float:
        return float(self.p.sum())

    @property
    def mu_known(self) -> float:
        return float(np.where(self.novel_assignment, self.p, self.q).sum())


def chernoff_upper_bounds(mu: float, delta: float) -> tuple[float, float]:
    """Multiplicative Chernoff bounds for a sum of Bernoulli votes with mean mu.

    Returns (upper_tail, lower_tail):
      P[X > (1 + delta) mu] <= (e^delta / (1+delta)^(1+delta))^mu
      P[X < (1 - delta) mu] <= (e^-delta / (1-delta)^(1-delta))^mu
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    upper = np.exp(mu * (delta - (1.0 + delta) * np.log1p(delta)))
    lower = np.exp(mu * (-delta - (1.0 - delta) * np.log(1.0 - delta)))
    return float(upper), float(lower)


@dataclass(frozen=True)
class VoteSimulation:
    novel_counts: np.ndarray  # histogram of vote counts over [0..L], novel condition
    known_counts: np.ndarray
    midpoint: float
    miss_rate: float  # P[X < midpoint | novel]
    false_rate: float  # P[X > midpoint | known]
    total_error: float  # equal-prior mean of the two
    mu_novel: float
    mu_known: float


def simulate_vote_distribution(
    rates: VoteRates, trials: int, seed: int = 0
) -> VoteSimulation:
    """Draw independent Bernoulli votes and measure tails at the midpoint threshold.

    Votes are sampled independently per classifier, the literal form of the
    conditional-independence assumption. Counts landing exactly on the
    midpoint are errors for neither condition.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    L = rates.num_classifiers
    psi = np.where(rates.novel_assignment, rates.p, rates.q)
    novel_votes = (rng.random((trials, L)) < rates.p).sum(axis=1)
    known_votes = (rng.random((trials, L)) < psi).sum(axis=1)
    midpoint = 0.5 * (rates.mu_novel + rates.mu_known)
    miss = float((novel_votes < midpoint).mean())
    false = float((known_votes > midpoint).mean())
    return VoteSimulation(
        novel_counts=np.bincount(novel_votes, minlength=L + 1),
        known_counts=np.bincount(known_votes, minlength=L + 1),
        midpoint=midpoint,
        miss_rate=miss,
        false_rate=false,
        total_error=0.5 * (miss + false),
        mu_novel=rates.mu_novel,
        mu_known=rates.mu_known,
    )


def two_sample_ks(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: max ECDF gap."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    values = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, values, side="right") / a.size
    cdf_b = np.searchsorted(b, values, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-fold empirical support for the two working requirements."""

    r1_auc: float  # ratio score separates presumed-known from truly-novel sets
    r2_ks: float  # ECDF distance between presumed-novel and truly-novel scores
    scatter: tuple[tuple[float, float, str], ...]  # (theta_set, theta_class, category)
    mean_votes_novel: float
    mean_votes_known: float

    @property
    def vote_gap(self) -> float:
        return self.mean_votes_novel - self.mean_votes_known


def _partition_sets(features_by_class, s, rng):
    sets = []
    for key in sorted(features_by_class):
        mat = features_by_class[key]
        order = rng.permutation(mat.shape[0])
        for t in range(mat.shape[0] // s):
            sets.append(mat[order[t * s : (t + 1) * s]])
    return sets


def requirement_diagnostics(
    ensemble: EnsembleModel,
    binary_train: LabeledDataset,
    known_test: LabeledDataset,
    novel_pool: LabeledDataset,
    s: int = 1,
    partition_index: int = 0,
    seed: int = 0,
) -> DiagnosticsRecord:
    """Score three kinds of material through one partition's unit.

    Categories: presumed-known and presumed-novel sets built from the
    calibration split of the chosen partition, and truly-novel sets from the
    held-out classes. Emits the direction check (AUC of the negated ratio
    score, known vs truly novel), the similarity check (KS statistic between
    presumed-novel and truly-novel ratio scores), the scatter table behind
    both, and the ensemble's mean vote counts on known and novel test sets.
    """
    if not 0 <= partition_index < ensemble.num_classifiers:
        raise ValueError(f"partition_index must be in [0, {ensemble.num_classifiers})")
    clf = ensemble.classifiers[partition_index]
    model = clf.partition_model
    local_classes = model.classes()
    class_index = ensemble.global_model.class_index
    rng = np.random.default_rng(child_seed(seed, 0))

    def grouped(ds: LabeledDataset, keep: set[str] | None):
        groups = {}
        probs = predict_confidence_matrix(model, ds.features)
        for lab in ds.classes():
            if keep is not None and lab not in keep:
                continue
            groups[lab] = probs[ds.rows_of_class(lab)]
        return groups

    known_labels = {local_classes[i] for i in range(model.k)}
    presumed_novel_labels = {
        lab for lab, g in class_index.items() if g in clf.partition.presumed_novel
    }
    categories = {
        "known": _partition_sets(grouped(binary_train, known_labels), s, rng),
        "presumed_novel": _partition_sets(
            grouped(binary_train, presumed_novel_labels), s, rng
        ),
        "truly_novel": _partition_sets(grouped(novel_pool, None), s, rng),
    }
    for name, sets in categories.items():
        if not sets:
            raise ValueError(f"category {name!r} yields no sets of size {s}")

    scatter = []
    theta_by_category: dict[str, list[float]] = {name: [] for name in categories}
    for name, sets in categories.items():
        for conf in sets:
            theta_set = raw_novelty_score(conf)
            o_hat = class_index[local_classes[predicted_assignment(conf)]]
            scatter.append((theta_set, clf.theta_table[o_hat], name))
            theta_by_category[name].append(theta_set)

    r1_scored = [ScoredSet(-t, False) for t in theta_by_category["known"]] + [
        ScoredSet(-t, True) for t in theta_by_category["truly_novel"]
    ]
    r1 = auc(roc_curve(r1_scored))
    r2 = two_sample_ks(
        np.array(theta_by_category["presumed_novel"]),
        np.array(theta_by_category["truly_novel"]),
    )

    known_sets = sample_test_sets(known_test, set(), s, child_seed(seed, 1))
    novel_sets = sample_test_sets(novel_pool, set(novel_pool.class_index), s, child_seed(seed, 2))
    votes_known = score_sets(ensemble, [F for F, _ in known_sets])
    votes_novel = score_sets(ensemble, [F for F, _ in novel_sets])
    return DiagnosticsRecord(
        r1_auc=float(r1),
        r2_ks=float(r2),
        scatter=tuple(scatter),
        mean_votes_novel=float(votes_novel.mean()),
        mean_votes_known=float(votes_known.mean()),
    )


def write_theta_scatter(record: DiagnosticsRecord, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theta_set,theta_class,category\n")
        for theta_set, theta_class, category in record.scatter:
            fh.write(f"{theta_set!r},{theta_class!r},{category}\n")


def chernoff_report_rows(
    p: float,
    q: float,
    ensemble_sizes: tuple[int, ...],
    deltas: tuple[float, ...] | None,
    trials: int,
    seed: int,
    presumed_novel_count: int = 0,
) -> list[dict]:
    """One row per (ensemble size, delta): bounds plus empirical midpoint tails.

    With deltas=None, each size uses the midpoint-matched value
    (mu_novel - mu_known) / (mu_novel + mu_known).
    """
    rows = []
    for L in ensemble_sizes:
        if not 0 <= presumed_novel_count <= L:
            raise ValueError("presumed_novel_count must be in [0, L]")
        flags = np.arange(L) < presumed_novel_count
        rates = VoteRates(p=np.full(L, p), q=np.full(L, q), novel_assignment=flags)
        sim = simulate_vote_distribution(rates, trials, child_seed(seed, L))
        if deltas is None:
            span = sim.mu_novel + sim.mu_known
            gap = (sim.mu_novel - sim.mu_known) / span if span > 0 else 0.5
            use = (min(max(gap, 1e-12), 1.0 - 1e-12),)
        else:
            use = deltas
        for delta in use:
            # a zero mean makes the bound trivially 1
            upper_known = chernoff_upper_bounds(sim.mu_known, delta)[0] if sim.mu_known > 0 else 1.0
            lower_novel = chernoff_upper_bounds(sim.mu_novel, delta)[1] if sim.mu_novel > 0 else 1.0
            rows.append(
                {
                    "L": L,
                    "delta": delta,
                    "mu_novel": sim.mu_novel,
                    "mu_known": sim.mu_known,
                    "bound_upper": upper_known,
                    "bound_lower": lower_novel,
                    "empirical_upper": sim.false_rate,
                    "empirical_lower": sim.miss_rate,
                    "total_error": sim.total_error,
                }
            )
    return rows


def write_chernoff_report(rows: list[dict], path: str) -> None:
    columns = (
        "L",
        "delta",
        "mu_novel",
        "mu_known",
        "bound_upper",
        "bound_lower",
        "empirical_upper",
        "empirical_lower",
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in columns) + "\n")
