"""Command-line entry point: synth, run, simulate, diagnose."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .analysis import chernoff_report_rows, requirement_diagnostics, write_chernoff_report, write_theta_scatter
from .config import ConfigError, RunConfig, load_run_config
from .dataset import LabeledDataset, SplitSpec, generate_synthetic, load_csv, save_csv, split_per_class
from .ensemble import train_ensemble_multi
from ._seeds import child_seed
from .evaluate import _fold_layout, run_cross_validation

log = logging.getLogger("noveltydetect")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _setup_logging() -> str | None:
    level_name = os.environ.get("NOVELTY_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        return f"NOVELTY_LOG must be one of {sorted(levels)}, got {level_name!r}"
    logging.basicConfig(
        level=levels[level_name], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    return None


def _load_data(cfg: RunConfig) -> LabeledDataset:
    if cfg.csv_path is not None:
        log.info("loading dataset from %s", cfg.csv_path)
        return load_csv(cfg.csv_path)
    if cfg.synth is not None:
        log.info("generating synthetic dataset (%d classes)", cfg.synth.num_classes)
        return generate_synthetic(cfg.synth)
    raise ConfigError(["this command needs a data source: data.csv or data.synth.*"])


class _OutputTracker:
    """Records files this command created so a failure can remove them."""

    def __init__(self, directory: str):
        self.directory = directory
        self.created: list[str] = []
        os.makedirs(directory, exist_ok=True)

    def path(self, name: str) -> str:
        full = os.path.join(self.directory, name)
        self.created.append(full)
        return full

    def discard_all(self) -> None:
        for full in self.created:
            try:
                os.remove(full)
            except OSError:
                pass


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synth is None:
        raise ConfigError(["synth needs data.synth.* keys"])
    ds = generate_synthetic(cfg.synth)
    save_csv(ds, cfg.output)
    print(f"wrote {ds.n} rows, {ds.num_classes} classes, d={ds.dim} to {cfg.output}")
    return EXIT_OK


def _print_aggregate(report) -> None:
    print(f"{'method':<16}{'representation':<16}{'s':>3}  {'auc':>17}  {'eer':>17}")
    for row in report.aggregate():
        auc_text = f"{row.auc_mean:.4f} +/- {row.auc_std:.4f}"
        eer_text = f"{row.eer_mean:.4f} +/- {row.eer_std:.4f}"
        print(f"{row.method:<16}{row.representation:<16}{row.s:>3}  {auc_text:>17}  {eer_text:>17}")


def cmd_run(cfg: RunConfig) -> int:
    ds = _load_data(cfg)
    out = _OutputTracker(cfg.output_dir)
    try:
        report = run_cross_validation(ds, cfg.eval)
        report.write_summary_csv(out.path("summary.csv"))
        for (token, s, fold), curve in sorted(report.rocs.items()):
            with open(out.path(f"roc_{token}_{s}_{fold}.csv"), "w", encoding="utf-8") as fh:
                fh.write("threshold,fpr,tpr\n")
                for t, f, tp in zip(curve.thresholds, curve.fpr, curve.tpr):
                    fh.write(f"{t!r},{f!r},{tp!r}\n")
        if report.diagnostics is not None:
            write_theta_scatter(report.diagnostics, out.path("theta_scatter.csv"))
    except Exception:
        out.discard_all()
        raise
    _print_aggregate(report)
    log.info("wrote %d report files to %s", len(out.created), cfg.output_dir)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    out = _OutputTracker(cfg.output_dir)
    try:
        rows = chernoff_report_rows(
            p=cfg.simulate.p,
            q=cfg.simulate.q,
            ensemble_sizes=cfg.simulate.ensemble_sizes,
            deltas=cfg.simulate.deltas,
            trials=cfg.simulate.trials,
            seed=cfg.eval.seed,
            presumed_novel_count=cfg.simulate.presumed_novel_count,
        )
        write_chernoff_report(rows, out.path("chernoff_report.csv"))
    except Exception:
        out.discard_all()
        raise
    print(f"{'L':>5} {'delta':>8} {'bound_up':>10} {'bound_lo':>10} {'emp_up':>10} {'emp_lo':>10} {'error':>10}")
    for row in rows:
        print(
            f"{row['L']:>5} {row['delta']:>8.4f} {row['bound_upper']:>10.4g} "
            f"{row['bound_lower']:>10.4g} {row['empirical_upper']:>10.4g} "
            f"{row['empirical_lower']:>10.4g} {row['total_error']:>10.4g}"
        )
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig) -> int:
    ds = _load_data(cfg)
    ev = cfg.eval
    heldout = set(_fold_layout(ds, ev, 0)[0])
    known = ds.restrict_to_classes(set(ds.class_index) - heldout)
    novel_pool = ds.restrict_to_classes(heldout)
    split = SplitSpec(
        multiclass_fraction=ev.multiclass_fraction,
        binary_fraction=ev.binary_fraction,
        seed=child_seed(ev.seed, 11, 0, 0),
    )
    mc_train, bin_train, known_test = split_per_class(known, split)
    log.info("training diagnostic ensemble on %d known classes", known.num_classes)
    ensembles = train_ensemble_multi(
        mc_train,
        bin_train,
        ev.ensemble_size,
        ev.novel_fraction,
        (cfg.diagnose.set_size,),
        ev.train,
        ev.svm_c,
        child_seed(ev.seed, 12, 0, 0),
    )
    record = requirement_diagnostics(
        ensembles[cfg.diagnose.set_size],
        bin_train,
        known_test,
        novel_pool,
        s=cfg.diagnose.set_size,
        partition_index=cfg.diagnose.partition,
        seed=child_seed(ev.seed, 14),
    )
    out = _OutputTracker(cfg.output_dir)
    try:
        write_theta_scatter(record, out.path("theta_scatter.csv"))
    except Exception:
        out.discard_all()
        raise
    print(f"held-out novel classes: {sorted(heldout)}")
    print(f"direction check (ratio-score AUC, known vs truly novel): {record.r1_auc:.4f}")
    print(f"similarity check (KS, presumed-novel vs truly-novel):    {record.r2_ks:.4f}")
    print(
        f"mean votes: novel {record.mean_votes_novel:.2f}, known "
        f"{record.mean_votes_known:.2f}, gap {record.vote_gap:.2f}"
    )
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "run": cmd_run,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="noveltydetect",
        description="Novelty detection experiments for multiclass data with missing classes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("synth", "generate a synthetic dataset CSV"),
        ("run", "run the cross-validation experiment and write reports"),
        ("simulate", "simulate vote distributions against Chernoff bounds"),
        ("diagnose", "train one fold and write the score scatter diagnostics"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to a key = value config file")
    args = parser.parse_args(argv)

    env_problem = _setup_logging()
    if env_problem is not None:
        print(env_problem, file=sys.stderr)
        return EXIT_CONFIG

    try:
        cfg = load_run_config(args.config)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
