"""``phasefeat`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import synth
from .classify import CLASSES, compute_metrics, stratified_split
from .config import ConfigError, PipelineConfig
from .features import write_matrix_csv
from .ingest import ClassLabel, DataError, load_cohort_data, load_manifest, validate_cohort
from .pipeline import (
    StageError,
    dumps_report,
    extract_features,
    read_confusion_csv,
    read_feature_table,
    run_pipeline,
    select_features,
    write_confusion_csv,
    write_feature_table,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("phasefeat")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} requires {', '.join(missing)}")


def _load_cohort(args, cfg):
    cohort = load_manifest(args.manifest)
    report = validate_cohort(cohort, dt=cfg["sampling.dt"])
    if not report.ok:
        raise DataError("invalid cohort: " + "; ".join(report.findings))
    return cohort


def cmd_synth(args) -> int:
    cfg = _config(args)
    name = args.preset or cfg["synth.preset"]
    if name not in synth.PRESETS:
        raise UsageError(f"unknown preset {name!r}; available presets: {', '.join(synth.PRESETS)}")
    scfg = synth.preset(
        name,
        regions=cfg["synth.regions"],
        timepoints=cfg["synth.timepoints"],
        dt=cfg["sampling.dt"],
        subjects_per_class=cfg["synth.subjects_per_class"],
        seed=cfg["synth.seed"],
    )
    cohort = synth.generate_cohort(scfg, args.out)
    print(f"wrote {len(cohort)} subjects and manifest to {Path(args.out) / 'manifest.csv'}")
    return EXIT_OK


def cmd_features(args) -> int:
    _require(args, "manifest")
    cfg = _config(args)
    cohort = _load_cohort(args, cfg)
    series = load_cohort_data(cohort, dt=cfg["sampling.dt"])
    table = extract_features(series, cohort.labels, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sidecar = write_feature_table(table, out / "features.csv")
    if args.matrices:
        mdir = out / "matrices"
        mdir.mkdir(exist_ok=True)
        for sf in table.subjects:
            write_matrix_csv(sf.plv, mdir / f"{sf.subject_id}_plv.csv")
            write_matrix_csv(sf.msc, mdir / f"{sf.subject_id}_msc.csv")
    print(f"wrote {table.x.shape[0]} x {table.x.shape[1]} feature table to {out / 'features.csv'} ({sidecar.name})")
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = _config(args)
    if args.features:
        table = read_feature_table(args.features)
    else:
        _require(args, "manifest")
        cohort = _load_cohort(args, cfg)
        table = extract_features(load_cohort_data(cohort, dt=cfg["sampling.dt"]), cohort.labels, cfg)
    train, _ = stratified_split(table.labels, cfg["split.per_class_test"], cfg["split.seed"])
    outcome, cols = select_features(table, train, cfg, skip_selection=args.skip_selection)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": cfg.to_dict(),
        "train": [table.subject_ids[i] for i in train],
        "selection": outcome.to_dict(),
        "feature_columns": [int(c) for c in cols],
    }
    (out / "selection.json").write_text(dumps_report(payload))
    print(f"selected sets: {', '.join(outcome.selected_sets)}; {cols.size} features kept")
    return EXIT_OK


def cmd_run(args) -> int:
    _require(args, "manifest")
    cfg = _config(args)
    cohort = _load_cohort(args, cfg)
    table = read_feature_table(args.features) if args.features else None
    result = run_pipeline(cohort, cfg, skip_selection=args.skip_selection, table=table)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps_report(result.report))
    write_confusion_csv(result.confusion, out / "confusion.csv")
    (out / "timing.json").write_text(json.dumps({k: round(v, 6) for k, v in result.timing.items()}, indent=2) + "\n")
    if result.metrics is not None:
        print(format_metrics(result.metrics))
    if args.skip_selection:
        print("feature selection skipped: all 6 sets and all features used")
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


def format_metrics(m) -> str:
    lines = [f"{'class':<8}" + "".join(f"{n:>8}" for n in ("AC", "PR", "SP", "SE"))]

    def pct(v):
        return f"{'n/a':>8}" if np.isnan(v) else f"{100 * v:>7.1f}%"

    for i, c in enumerate(CLASSES):
        lines.append(f"{ClassLabel(c).name:<8}" + "".join(pct(m.per_class[n][i]) for n in ("AC", "PR", "SP", "SE")))
    lines.append(f"{'macro':<8}" + "".join(pct(m.macro[n]) for n in ("AC", "PR", "SP", "SE")))
    lines.append(f"raw accuracy: {100 * m.raw_accuracy:.1f}%")
    return "\n".join(lines)


def cmd_metrics(args) -> int:
    if not args.confusion:
        raise UsageError("metrics requires a confusion matrix CSV path")
    cm = read_confusion_csv(args.confusion)
    print(format_metrics(compute_metrics(cm)))
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "select": cmd_select,
    "run": cmd_run,
    "metrics": cmd_metrics,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phasefeat", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat 'key = value' config file")
        s.add_argument("--seed", type=int, help="override every seed in the config")
        if name == "metrics":
            s.add_argument("confusion", nargs="?", help="3x3 predicted-by-true CSV")
            continue
        s.add_argument("--out", required=True, help="output directory")
        if name == "synth":
            s.add_argument("--preset", help=f"one of {', '.join(synth.PRESETS)}")
            continue
        s.add_argument("--manifest", help="subject_id,label,path CSV")
        if name == "features":
            s.add_argument("--matrices", action="store_true", help="also write per-subject PLV/MSC CSVs")
        else:
            s.add_argument("--features", help="precomputed features.csv (with .index.json sidecar)")
            s.add_argument("--skip-selection", action="store_true", help="bypass set selection and t-tests")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"phasefeat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        code = EXIT_DATA if isinstance(exc.cause, (ValueError, OSError)) else EXIT_INTERNAL
        print(f"phasefeat {args.command}: {exc}", file=sys.stderr)
        return code
    except (DataError, ValueError, OSError) as exc:
        print(f"phasefeat {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"phasefeat {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
