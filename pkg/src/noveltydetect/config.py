"""Flat ``key = value`` run configuration, fully validated before any work."""

from __future__ import annotations

import os
from dataclasses import dataclass

from .baselines import KernelSpec
from .dataset import SynthSpec
from .evaluate import EvalConfig
from .softlabel import TrainConfig

__all__ = ["ConfigError", "RunConfig", "SimulateParams", "DiagnoseParams", "load_run_config"]


class ConfigError(ValueError):
    """One or more invalid configuration entries; .problems lists them all."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass(frozen=True)
class SimulateParams:
    p: float = 0.7
    q: float = 0.3
    ensemble_sizes: tuple[int, ...] = (10, 25, 50, 100)
    deltas: tuple[float, ...] | None = None  # None: midpoint-matched per size
    trials: int = 100_000
    presumed_novel_count: int = 0


@dataclass(frozen=True)
class DiagnoseParams:
    set_size: int = 1
    partition: int = 0


@dataclass(frozen=True)
class RunConfig:
    csv_path: str | None
    synth: SynthSpec | None
    output: str
    output_dir: str
    eval: EvalConfig
    simulate: SimulateParams
    diagnose: DiagnoseParams


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment; duplicates are errors."""
    problems = []
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            problems.append(f"{source}:{lineno}: empty key")
        elif key in values:
            problems.append(f"{source}:{lineno}: duplicate key {key!r}")
        else:
            values[key] = value
    if problems:
        raise ConfigError(problems)
    return values


_KNOWN_KEYS = {
    "data.csv",
    "data.synth.classes",
    "data.synth.dim",
    "data.synth.examples_per_class",
    "data.synth.center_spread",
    "data.synth.within_std",
    "data.synth.seed",
    "output",
    "output_dir",
    "seed",
    "parallelism",
    "split.multiclass_fraction",
    "split.binary_fraction",
    "cv.folds",
    "cv.repeats",
    "eval.set_sizes",
    "methods",
    "train.learning_rate",
    "train.l2_penalty",
    "train.max_epochs",
    "train.tolerance",
    "global_train.learning_rate",
    "global_train.l2_penalty",
    "global_train.max_epochs",
    "global_train.tolerance",
    "ensemble.size",
    "ensemble.novel_fraction",
    "ensemble.svm_c",
    "ensemble.normalize_votes",
    "baselines.knn_k",
    "baselines.ocsvm_nu",
    "baselines.ocsvm_gamma",
    "baselines.kernel",
    "baselines.kernel_gamma",
    "baselines.kernel_degree",
    "baselines.kernel_coef0",
    "baselines.representations",
    "baselines.knfst_representation",
    "simulate.p",
    "simulate.q",
    "simulate.ensemble_sizes",
    "simulate.deltas",
    "simulate.trials",
    "simulate.presumed_novel_count",
    "diagnose.set_size",
    "diagnose.partition",
}


class _Reader:
    def __init__(self, values: dict[str, str]):
        self.values = values
        self.problems: list[str] = []

    def _convert(self, key, caster, default, describe):
        if key not in self.values:
            return default
        try:
            return caster(self.values[key])
        except (ValueError, TypeError):
            self.problems.append(f"{key}: expected {describe}, got {self.values[key]!r}")
            return default

    def string(self, key, default=None):
        return self.values.get(key, default)

    def integer(self, key, default):
        return self._convert(key, int, default, "an integer")

    def real(self, key, default):
        return self._convert(key, float, default, "a number")

    def boolean(self, key, default):
        def cast(v):
            lowered = v.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(v)

        return self._convert(key, cast, default, "a boolean")

    def int_list(self, key, default):
        def cast(v):
            return tuple(int(part.strip()) for part in v.split(",") if part.strip())

        return self._convert(key, cast, default, "a comma-separated integer list")

    def str_list(self, key, default):
        def cast(v):
            return tuple(part.strip() for part in v.split(",") if part.strip())

        return self._convert(key, cast, default, "a comma-separated list")

    def real_or_auto(self, key, default):
        if self.values.get(key, "").lower() == "auto":
            return None
        return self._convert(key, float, default, "a number or 'auto'")


def load_run_config(path: str) -> RunConfig:
    """Read and validate a config file; every problem is reported at once."""
    if not os.path.isfile(path):
        raise ConfigError([f"no such config file: {path}"])
    with open(path, "r", encoding="utf-8") as fh:
        values = parse_config_text(fh.read(), source=path)

    problems = [f"unknown key {k!r}" for k in sorted(values.keys() - _KNOWN_KEYS)]
    reader = _Reader(values)
    seed = reader.integer("seed", 0)

    synth = None
    synth_keys = [k for k in values if k.startswith("data.synth.")]
    if synth_keys:
        try:
            synth = SynthSpec(
                num_classes=reader.integer("data.synth.classes", 20),
                dim=reader.integer("data.synth.dim", 16),
                examples_per_class=reader.integer("data.synth.examples_per_class", 100),
                center_spread=reader.real("data.synth.center_spread", 1.0),
                within_std=reader.real("data.synth.within_std", 0.6),
                seed=reader.integer("data.synth.seed", seed),
            )
        except ValueError as exc:
            problems.append(f"data.synth: {exc}")
    csv_path = reader.string("data.csv")
    if csv_path is not None and synth is not None:
        problems.append("give either data.csv or data.synth.*, not both")

    try:
        train = TrainConfig(
            learning_rate=reader.real("train.learning_rate", 0.5),
            l2_penalty=reader.real("train.l2_penalty", 1e-3),
            max_epochs=reader.integer("train.max_epochs", 200),
            tolerance=reader.real("train.tolerance", 1e-5),
            seed=seed,
        )
    except ValueError as exc:
        problems.append(f"train: {exc}")
        train = TrainConfig()

    global_train = None
    if any(k.startswith("global_train.") for k in values):
        try:
            global_train = TrainConfig(
                learning_rate=reader.real("global_train.learning_rate", train.learning_rate),
                l2_penalty=reader.real("global_train.l2_penalty", train.l2_penalty),
                max_epochs=reader.integer("global_train.max_epochs", train.max_epochs),
                tolerance=reader.real("global_train.tolerance", train.tolerance),
                seed=seed,
            )
        except ValueError as exc:
            problems.append(f"global_train: {exc}")

    try:
        kernel = KernelSpec(
            kind=reader.string("baselines.kernel", "rbf"),
            gamma=reader.real_or_auto("baselines.kernel_gamma", None),
            degree=reader.integer("baselines.kernel_degree", 3),
            coef0=reader.real("baselines.kernel_coef0", 1.0),
        )
    except ValueError as exc:
        problems.append(f"baselines.kernel: {exc}")
        kernel = KernelSpec()

    eval_config = EvalConfig(
        folds=reader.integer("cv.folds", 10),
        repeats=reader.integer("cv.repeats", 3),
        set_sizes=reader.int_list("eval.set_sizes", (1,)),
        methods=reader.str_list("methods", ("ensemble", "threshold", "max_confidence")),
        multiclass_fraction=reader.real("split.multiclass_fraction", 0.6),
        binary_fraction=reader.real("split.binary_fraction", 0.1),
        train=train,
        global_train=global_train,
        ensemble_size=reader.integer("ensemble.size", 30),
        novel_fraction=reader.real("ensemble.novel_fraction", 0.1),
        svm_c=reader.real("ensemble.svm_c", 1.0),
        normalize_votes=reader.boolean("ensemble.normalize_votes", False),
        knn_k=reader.int_list("baselines.knn_k", (1, 2, 5)),
        ocsvm_nu=reader.real("baselines.ocsvm_nu", 0.5),
        ocsvm_gamma=reader.real_or_auto("baselines.ocsvm_gamma", None),
        kernel=kernel,
        baseline_representations=reader.str_list(
            "baselines.representations", ("confidence", "original")
        ),
        knfst_representation=reader.string("baselines.knfst_representation", "original"),
        seed=seed,
        parallelism=reader.integer("parallelism", os.cpu_count() or 1),
        collect_diagnostics=True,
        collect_rocs=True,
    )
    try:
        eval_config.validate()
    except ValueError as exc:
        problems.append(str(exc))

    deltas_raw = reader.string("simulate.deltas", "auto")
    if deltas_raw.lower() == "auto":
        deltas = None
    else:
        try:
            deltas = tuple(float(p.strip()) for p in deltas_raw.split(",") if p.strip())
        except ValueError:
            problems.append(
                f"simulate.deltas: expected 'auto' or comma-separated numbers, got {deltas_raw!r}"
            )
            deltas = None
    simulate = SimulateParams(
        p=reader.real("simulate.p", 0.7),
        q=reader.real("simulate.q", 0.3),
        ensemble_sizes=reader.int_list("simulate.ensemble_sizes", (10, 25, 50, 100)),
        deltas=deltas,
        trials=reader.integer("simulate.trials", 100_000),
        presumed_novel_count=reader.integer("simulate.presumed_novel_count", 0),
    )
    if not 0.0 < simulate.p <= 1.0:
        problems.append("simulate.p must be in (0, 1]")
    if not 0.0 <= simulate.q < 1.0:
        problems.append("simulate.q must be in [0, 1)")
    if simulate.trials < 1:
        problems.append("simulate.trials must be positive")
    if any(n < 1 for n in simulate.ensemble_sizes):
        problems.append("simulate.ensemble_sizes must be positive")
    if simulate.deltas is not None and any(not 0.0 < d < 1.0 for d in simulate.deltas):
        problems.append("simulate.deltas must lie in (0, 1)")

    diagnose = DiagnoseParams(
        set_size=reader.integer("diagnose.set_size", 1),
        partition=reader.integer("diagnose.partition", 0),
    )
    if diagnose.set_size < 1:
        problems.append("diagnose.set_size must be positive")
    if diagnose.partition < 0:
        problems.append("diagnose.partition must be non-negative")

    problems.extend(reader.problems)
    if problems:
        raise ConfigError(problems)
    return RunConfig(
        csv_path=csv_path,
        synth=synth,
        output=reader.string("output", "dataset.csv"),
        output_dir=reader.string("output_dir", "out"),
        eval=eval_config,
        simulate=simulate,
        diagnose=diagnose,
    )
