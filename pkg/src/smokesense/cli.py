"""Command-line interface for the smoke-detection pipeline.

Subcommands cover the full workflow: synthesize a corpus, probe its signal,
train the two-stage model, evaluate a checkpoint, run the multi-seed
experiment suite, and aggregate run records into a report. Every command
prints a JSON payload on stdout; failures print a JSON error on stderr and
exit nonzero.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from smokesense.config import PipelineConfig, resolve_config
from smokesense.data.manifest import MANIFEST_FILENAME, read_manifest
from smokesense.data.probes import certify_discriminative_corpus
from smokesense.data.synthetic import generate_synthetic_dataset
from smokesense.evaluation.metrics import MetricsReport, aggregate_runs, write_prediction_log
from smokesense.model.checkpoint import build_model, load_checkpoint, save_checkpoint
from smokesense.training.experiment import (
    RUNS_FILENAME,
    SUITE_TABLE_FILENAME,
    read_runs,
    run_experiment_suite,
    write_suite_table,
)
from smokesense.training.loop import (
    ARM_BASELINE,
    ARM_NAMES,
    ARM_REAL,
    check_geometry,
    predict_fires,
    prepare_data,
    train_arm,
    train_vanilla,
)

SPLIT_CHOICES = ("train", "val", "test")


def _resolved(args) -> PipelineConfig:
    return resolve_config(config_file=args.config, overrides=args.set or [])


def _prepared(args, config: PipelineConfig):
    return prepare_data(args.root, config.data.geometry(), k=config.k_stations)


def _history(result) -> list[dict]:
    return [dataclasses.asdict(h) for h in result.history]


def _table_payload(table) -> dict:
    return {
        arm: {metric: {"mean": mean, "sd": sd} for metric, (mean, sd) in metrics.items()}
        for arm, metrics in table.items()
    }


def cmd_synth(args) -> dict:
    config = _resolved(args)
    entries = generate_synthetic_dataset(config.data.spec(), args.root)
    splits = {}
    for entry in entries:
        splits[entry.split] = splits.get(entry.split, 0) + 1
    return {
        "root": str(Path(args.root)),
        "n_fires": len(entries),
        "coupling": config.data.coupling,
        "splits": splits,
    }


def cmd_probe(args) -> dict:
    aucs = certify_discriminative_corpus(args.root)
    entries = read_manifest(Path(args.root) / MANIFEST_FILENAME)
    return {"root": str(Path(args.root)), "n_fires": len(entries), **aucs}


def cmd_train(args) -> dict:
    config = _resolved(args)
    data = _prepared(args, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    stage_one = train_vanilla(data, config.model.vanilla(), config.stage1)
    stage1_path = out_dir / "stage1.npz"
    save_checkpoint(stage_one.checkpoint, stage1_path)

    result = train_arm(args.arm, stage_one.checkpoint, config.model.fused(), data, config.stage2)
    arm_path = out_dir / f"{args.arm}.npz"
    save_checkpoint(result.checkpoint, arm_path)

    history_path = out_dir / "history.json"
    history_path.write_text(
        json.dumps(
            {"stage1": _history(stage_one), args.arm: _history(result)}, indent=2
        )
    )
    return {
        "stage1_checkpoint": str(stage1_path),
        "arm_checkpoint": str(arm_path),
        "history": str(history_path),
        "arm": args.arm,
        "stage1_val_loss": stage_one.checkpoint.val_loss,
        "arm_val_loss": result.checkpoint.val_loss,
        "stage1_stop_reason": stage_one.stop_reason,
        "arm_stop_reason": result.stop_reason,
    }


def cmd_evaluate(args) -> dict:
    config = _resolved(args)
    data = _prepared(args, config)
    checkpoint = load_checkpoint(args.checkpoint)
    model = build_model(checkpoint)
    check_geometry(model, data)
    arm = args.arm or (ARM_REAL if checkpoint.config.fusion_enabled else ARM_BASELINE)
    fires = data.split(args.split)
    if not fires:
        raise ValueError(f"no fires in the '{args.split}' split")
    rows = predict_fires(model, fires, config.stage2, arm)
    if args.out:
        write_prediction_log(args.out, rows)
    report = MetricsReport.from_rows(rows, threshold=config.stage2.threshold)
    payload = {
        "checkpoint": str(Path(args.checkpoint)),
        "split": args.split,
        "arm": arm,
        "n_fires": len(fires),
        **dataclasses.asdict(report),
    }
    if args.out:
        payload["prediction_log"] = str(Path(args.out))
    return payload


def cmd_suite(args) -> dict:
    config = _resolved(args)
    data = _prepared(args, config)
    result = run_experiment_suite(data, config.experiment(), args.out)
    return {
        "out_dir": str(Path(args.out)),
        "suite_table": str(Path(args.out) / SUITE_TABLE_FILENAME),
        "runs": str(Path(args.out) / RUNS_FILENAME),
        "n_runs": len(result.runs),
        "table": _table_payload(result.table),
    }


def cmd_report(args) -> dict:
    runs = read_runs(args.runs)
    if not runs:
        raise ValueError(f"no run records in {args.runs}")
    arms = list(dict.fromkeys(r.arm for r in runs))
    table = {arm: aggregate_runs([r.report for r in runs if r.arm == arm]) for arm in arms}
    if args.out:
        write_suite_table(args.out, table, arms=arms)
    payload = {"runs": str(Path(args.runs)), "n_runs": len(runs), "table": _table_payload(table)}
    if args.out:
        payload["suite_table"] = str(Path(args.out))
    return payload


def cmd_config(args) -> dict:
    return dataclasses.asdict(_resolved(args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smokesense",
        description="Multimodal wildfire smoke detection pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config field, e.g. stage1.epochs=5 (repeatable)",
        )
        p.add_argument("--config", default=None, help="YAML file of config overrides")

    p = sub.add_parser("synth", help="generate a synthetic fire corpus")
    p.add_argument("--root", required=True, help="corpus directory to create")
    add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("probe", help="measure a corpus's weather/image signal")
    p.add_argument("--root", required=True, help="corpus directory")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("train", help="two-stage training on a corpus")
    p.add_argument("--root", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="directory for checkpoints and history")
    p.add_argument("--arm", default=ARM_REAL, choices=ARM_NAMES, help="stage-two weather arm")
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on one split")
    p.add_argument("--root", required=True, help="corpus directory")
    p.add_argument("--checkpoint", required=True, help="checkpoint .npz to score")
    p.add_argument("--split", default="test", choices=SPLIT_CHOICES)
    p.add_argument("--arm", default=None, choices=ARM_NAMES, help="weather arm (default: by checkpoint)")
    p.add_argument("--out", default=None, help="optional prediction-log CSV to write")
    add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("suite", help="multi-seed experiment over the weather arms")
    p.add_argument("--root", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="directory for suite artifacts")
    add_common(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("report", help="aggregate run records into a table")
    p.add_argument("--runs", required=True, help="runs.csv from a suite")
    p.add_argument("--out", default=None, help="optional suite-table CSV to write")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("config", help="print the resolved configuration")
    add_common(p)
    p.set_defaults(func=cmd_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.func(args)
    except (ValueError, KeyError, FileNotFoundError, OSError) as e:
        json.dump({"error": type(e).__name__, "message": str(e)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
