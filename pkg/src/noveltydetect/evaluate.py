"""Test-set construction, ROC/AUC/EER, and the class-held-out CV driver."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._seeds import child_seed
from .baselines import (
    KernelSpec,
    KnnIndex,
    knfst_score,
    knfst_train,
    knn_novelty_score,
    max_confidence_score,
    ocsvm_score,
    ocsvm_train,
    simple_threshold_score,
)
from .dataset import LabeledDataset, SplitSpec, fit_pca, merge_datasets, split_per_class
from .ensemble import score_sets, train_ensemble_multi
from .softlabel import TrainConfig, predict_confidence_matrix, train_softmax

__all__ = [
    "ScoredSet",
    "RocCurve",
    "EvalRow",
    "AggregateRow",
    "EvalReport",
    "EvalConfig",
    "KNOWN_METHODS",
    "sample_test_sets",
    "roc_curve",
    "auc",
    "eer",
    "run_cross_validation",
]

KNOWN_METHODS = ("ensemble", "threshold", "max_confidence", "ocsvm", "knn", "knfst")


@dataclass(frozen=True)
class ScoredSet:
    score: float
    is_novel: bool

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError("score must be finite")


@dataclass(frozen=True)
class RocCurve:
    """Operating points swept over strictly decreasing thresholds (with +/-inf ends)."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    def __post_init__(self):
        if not (np.diff(self.thresholds) < 0).all():
            raise ValueError("thresholds must be strictly decreasing")
        for arr in (self.fpr, self.tpr):
            if (np.diff(arr) < 0).any() or arr.min() < 0 or arr.max() > 1:
                raise ValueError("rates must be non-decreasing within [0, 1]")


def sample_test_sets(
    test: LabeledDataset, novel_classes: set[str], s: int, seed: int
) -> list[tuple[np.ndarray, bool]]:
    """Disjoint same-label feature sets of size s, with their novelty ground truth.

    Per class: seeded shuffle, floor(n/s) chunks, remainder dropped; classes
    with fewer than s examples contribute nothing.
    """
    if s < 1:
        raise ValueError("set size must be positive")
    rng = np.random.default_rng(seed)
    out: list[tuple[np.ndarray, bool]] = []
    for lab in test.classes():
        rows = test.rows_of_class(lab)
        order = rows[rng.permutation(rows.size)]
        for t in range(rows.size // s):
            out.append((test.features[order[t * s : (t + 1) * s]], lab in novel_classes))
    if not out:
        raise ValueError(f"no class yields a test set of size {s}")
    return out


def roc_curve(scored: list[ScoredSet]) -> RocCurve:
    """Sweep `novel iff score >= t` over every distinct score; ties collapse."""
    scores = np.array([e.score for e in scored])
    novel = np.array([e.is_novel for e in scored], dtype=bool)
    n_pos = int(novel.sum())
    n_neg = int((~novel).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one novel and one known entry")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_novel = novel[order]
    tp = np.cumsum(sorted_novel)
    fp = np.cumsum(~sorted_novel)
    last = np.append(np.nonzero(np.diff(sorted_scores))[0], len(sorted_scores) - 1)
    return RocCurve(
        thresholds=np.concatenate([[np.inf], sorted_scores[last], [-np.inf]]),
        fpr=np.concatenate([[0.0], fp[last] / n_neg, [1.0]]),
        tpr=np.concatenate([[0.0], tp[last] / n_pos, [1.0]]),
    )


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    df = np.diff(curve.fpr)
    mid = (curve.tpr[1:] + curve.tpr[:-1]) / 2.0
    return float((df * mid).sum())


def eer(curve: RocCurve) -> float:
    """Rate where FPR equals FNR, interpolating linearly along the polyline."""
    f, t = curve.fpr, curve.tpr
    gap = t + f - 1.0  # non-decreasing from -1 to +1
    for i in range(len(f) - 1):
        if gap[i] <= 0.0 <= gap[i + 1]:
            if gap[i + 1] == gap[i]:
                return float(f[i])
            a = -gap[i] / (gap[i + 1] - gap[i])
            return float(f[i] + a * (f[i + 1] - f[i]))
    raise AssertionError("ROC polyline must cross the anti-diagonal")


@dataclass(frozen=True)
class EvalRow:
    method: str
    representation: str
    s: int
    fold: int
    repeat: int
    auc: float
    eer: float


@dataclass(frozen=True)
class AggregateRow:
    method: str
    representation: str
    s: int
    auc_mean: float
    auc_std: float
    eer_mean: float
    eer_std: float
    n: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    diagnostics: object | None = None
    rocs: dict = field(default_factory=dict)  # (method_token, s, fold) -> RocCurve

    def aggregate(self) -> list[AggregateRow]:
        """Mean and sample std of AUC/EER per (method, representation, s)."""
        groups: dict[tuple[str, str, int], list[EvalRow]] = {}
        for row in self.rows:
            groups.setdefault((row.method, row.representation, row.s), []).append(row)
        out = []
        for (method, rep, s), rows in sorted(groups.items()):
            aucs = np.array([r.auc for r in rows])
            eers = np.array([r.eer for r in rows])
            out.append(
                AggregateRow(
                    method=method,
                    representation=rep,
                    s=s,
                    auc_mean=float(aucs.mean()),
                    auc_std=float(aucs.std(ddof=1)) if len(rows) > 1 else 0.0,
                    eer_mean=float(eers.mean()),
                    eer_std=float(eers.std(ddof=1)) if len(rows) > 1 else 0.0,
                    n=len(rows),
                )
            )
        return out

    def mean_auc(self, method: str, s: int, representation: str | None = None) -> float:
        vals = [
            r.auc
            for r in self.rows
            if r.method == method
            and r.s == s
            and (representation is None or r.representation == representation)
        ]
        if not vals:
            raise KeyError(f"no rows for method={method!r}, s={s}")
        return float(np.mean(vals))

    def write_summary_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("method,representation,s,fold,repeat,auc,eer\n")
            for r in self.rows:
                fh.write(
                    f"{r.method},{r.representation},{r.s},{r.fold},{r.repeat},"
                    f"{r.auc!r},{r.eer!r}\n"
                )


@dataclass(frozen=True)
class EvalConfig:
    """Everything run_cross_validation needs; all fields picklable primitives."""

    folds: int = 10
    repeats: int = 3
    set_sizes: tuple[int, ...] = (1,)
    methods: tuple[str, ...] = ("ensemble", "threshold", "max_confidence")
    multiclass_fraction: float = 0.6
    binary_fraction: float = 0.1
    train: TrainConfig = TrainConfig()
    global_train: TrainConfig | None = None  # None: same as `train`
    ensemble_size: int = 30
    novel_fraction: float = 0.1
    svm_c: float = 1.0
    normalize_votes: bool = False
    knn_k: tuple[int, ...] = (1, 2, 5)
    ocsvm_nu: float = 0.5
    ocsvm_gamma: float | None = None
    kernel: KernelSpec = KernelSpec()
    baseline_representations: tuple[str, ...] = ("confidence", "original")
    knfst_representation: str = "original"
    seed: int = 0
    parallelism: int = 1
    collect_diagnostics: bool = False
    collect_rocs: bool = False

    def validate(self) -> None:
        problems = []
        if self.folds < 2:
            problems.append("folds must be at least 2")
        if self.repeats < 1:
            problems.append("repeats must be at least 1")
        if not self.set_sizes or any(s < 1 for s in self.set_sizes):
            problems.append("set_sizes must be positive integers")
        unknown = [m for m in self.methods if m not in KNOWN_METHODS]
        if unknown:
            problems.append(f"unknown methods: {unknown} (choose from {KNOWN_METHODS})")
        if not self.methods:
            problems.append("at least one method is required")
        for rep in self.baseline_representations + (self.knfst_representation,):
            if rep not in ("confidence", "original") and not rep.startswith("pca:"):
                problems.append(f"unknown representation {rep!r}")
            if rep.startswith("pca:"):
                try:
                    if int(rep.split(":", 1)[1]) < 1:
                        problems.append(f"pca dimension must be positive in {rep!r}")
                except ValueError:
                    problems.append(f"malformed pca representation {rep!r}")
        if self.ensemble_size < 1:
            problems.append("ensemble_size must be positive")
        if not 0.0 < self.novel_fraction < 1.0:
            problems.append("novel_fraction must be in (0, 1)")
        if not 0.0 < self.ocsvm_nu <= 1.0:
            problems.append("ocsvm_nu must be in (0, 1]")
        if any(k < 1 for k in self.knn_k):
            problems.append("knn_k entries must be positive")
        if self.parallelism < 1:
            problems.append("parallelism must be at least 1")
        if problems:
            raise ValueError("; ".join(problems))


def _fold_layout(ds: LabeledDataset, config: EvalConfig, repeat: int) -> list[list[str]]:
    """Held-out (truly novel) label groups for one repeat; every class once."""
    classes = ds.classes()
    rng = np.random.default_rng(child_seed(config.seed, 10, repeat))
    perm = [classes[i] for i in rng.permutation(len(classes))]
    return [list(chunk) for chunk in np.array_split(np.array(perm, dtype=object), config.folds)]


def _score_one_fold(args):
    ds, config, repeat, fold = args
    heldout = set(_fold_layout(ds, config, repeat)[fold])
    if not heldout:
        raise ValueError(f"repeat {repeat} fold {fold}: no held-out classes")
    known = ds.restrict_to_classes(set(ds.class_index) - heldout)
    novel_pool = ds.restrict_to_classes(heldout)
    split = SplitSpec(
        multiclass_fraction=config.multiclass_fraction,
        binary_fraction=config.binary_fraction,
        seed=child_seed(config.seed, 11, repeat, fold),
    )
    mc_train, bin_train, known_test = split_per_class(known, split)
    test_pool = merge_datasets(known_test, novel_pool)

    def _context(method: str, exc: Exception):
        return type(exc)(f"repeat {repeat}, fold {fold}, method {method}: {exc}")

    ensembles = None
    if "ensemble" in config.methods:
        try:
            ensembles = train_ensemble_multi(
                mc_train,
                bin_train,
                config.ensemble_size,
                config.novel_fraction,
                config.set_sizes,
                config.train,
                config.svm_c,
                child_seed(config.seed, 12, repeat, fold),
                global_cfg=config.global_train,
            )
        except Exception as exc:
            raise _context("ensemble", exc) from exc
        global_model = ensembles[config.set_sizes[0]].global_model
    else:
        global_model = train_softmax(mc_train, config.global_train or config.train)

    train_pool = merge_datasets(mc_train, bin_train)

    def representation_fn(rep: str):
        if rep == "original":
            return lambda X: X
        if rep == "confidence":
            return lambda X: predict_confidence_matrix(global_model, X)
        m = int(rep.split(":", 1)[1])
        pca = fit_pca(mc_train, m)
        return lambda X: (X - pca.mean) @ pca.components

    # train baseline models once per representation
    scorers: list[tuple[str, str, object]] = []  # (method, representation, fn(set)->score)
    rep_fns: dict[str, object] = {}

    def rep_fn(rep: str):
        if rep not in rep_fns:
            rep_fns[rep] = representation_fn(rep)
        return rep_fns[rep]

    for method in config.methods:
        try:
            if method == "threshold":
                scorers.append(
                    ("threshold", "confidence", lambda S: simple_threshold_score(global_model, S))
                )
            elif method == "max_confidence":
                scorers.append(
                    ("max_confidence", "confidence", lambda S: max_confidence_score(global_model, S))
                )
            elif method == "ocsvm":
                for rep in config.baseline_representations:
                    fn = rep_fn(rep)
                    model = ocsvm_train(
                        fn(train_pool.features), nu=config.ocsvm_nu, gamma=config.ocsvm_gamma
                    )
                    scorers.append(
                        ("ocsvm", rep, lambda S, fn=fn, model=model: ocsvm_score(model, fn(S)))
                    )
            elif method == "knn":
                for rep in config.baseline_representations:
                    fn = rep_fn(rep)
                    feats = fn(train_pool.features)
                    for k in config.knn_k:
                        index = KnnIndex(points=feats, k=k)
                        scorers.append(
                            (
                                f"knn{k}",
                                rep,
                                lambda S, fn=fn, index=index: knn_novelty_score(index, fn(S)),
                            )
                        )
            elif method == "knfst":
                rep = config.knfst_representation
                fn = rep_fn(rep)
                transformed = LabeledDataset(
                    fn(train_pool.features), train_pool.labels, dict(train_pool.class_index)
                )
                model = knfst_train(transformed, config.kernel)
                scorers.append(
                    ("knfst", rep, lambda S, fn=fn, model=model: knfst_score(model, fn(S)))
                )
        except Exception as exc:
            raise _context(method, exc) from exc

    rows = []
    rocs = {}
    for s in config.set_sizes:
        sets = sample_test_sets(
            test_pool, heldout, s, child_seed(config.seed, 13, repeat, fold, s)
        )
        truth = [nov for _, nov in sets]
        per_method: list[tuple[str, str, list[float]]] = []
        if ensembles is not None:
            values = score_sets(
                ensembles[s], [F for F, _ in sets], normalized=config.normalize_votes
            )
            per_method.append(("ensemble", "confidence", list(values)))
        for method, rep, fn in scorers:
            try:
                per_method.append((method, rep, [fn(F) for F, _ in sets]))
            except Exception as exc:
                raise _context(method, exc) from exc
        for method, rep, values in per_method:
            scored = [ScoredSet(float(v), nov) for v, nov in zip(values, truth)]
            curve = roc_curve(scored)
            rows.append(
                EvalRow(
                    method=method,
                    representation=rep,
                    s=s,
                    fold=fold,
                    repeat=repeat,
                    auc=auc(curve),
                    eer=eer(curve),
                )
            )
            if config.collect_rocs and repeat == 0:
                token = method if rep == "confidence" else f"{method}-{rep.replace(':', '')}"
                rocs[(token, s, fold)] = curve

    diagnostics = None
    if config.collect_diagnostics and repeat == 0 and fold == 0 and ensembles is not None:
        from .analysis import requirement_diagnostics  # deferred: analysis imports this module

        diagnostics = requirement_diagnostics(
            ensembles[config.set_sizes[0]],
            bin_train,
            known_test,
            novel_pool,
            s=config.set_sizes[0],
            seed=child_seed(config.seed, 14),
        )
    return rows, rocs, diagnostics


def run_cross_validation(ds: LabeledDataset, config: EvalConfig) -> EvalReport:
    """Class-held-out cross-validation over every configured method and set size.

    Per repeat, a seeded class permutation is chunked into `folds` held-out
    groups, so each class is truly novel exactly once per repeat. Folds run
    independently (optionally in a process pool) and rows are reduced in a
    fixed order, so results do not depend on the parallelism level.
    """
    config.validate()
    if ds.num_classes < config.folds:
        raise ValueError(
            f"{ds.num_classes} classes cannot fill {config.folds} folds"
        )
    tasks = [
        (ds, config, repeat, fold)
        for repeat in range(config.repeats)
        for fold in range(config.folds)
    ]
    if config.parallelism > 1:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(_score_one_fold, tasks))
    else:
        results = [_score_one_fold(t) for t in tasks]

    rows: list[EvalRow] = []
    rocs: dict = {}
    diagnostics = None
    for (_, _, repeat, fold), (fold_rows, fold_rocs, fold_diag) in zip(tasks, results):
        rows.extend(fold_rows)
        rocs.update(fold_rocs)
        if fold_diag is not None:
            diagnostics = fold_diag
    rows.sort(key=lambda r: (r.repeat, r.fold, r.method, r.representation, r.s))
    return EvalReport(rows=tuple(rows), diagnostics=diagnostics, rocs=rocs)
