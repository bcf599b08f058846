"""Multi-seed experiment suite over the weather-source arms.

Each seed trains the image-only model once, then branches into the three
arms (baseline, random weather, real weather) from the same transferred
weights. Every run is scored on the held-out test fires and the per-arm
aggregates land in a small CSV table plus comparison plots.
"""

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from smokesense.evaluation.metrics import (
    REPORT_METRICS,
    MetricsReport,
    aggregate_runs,
    write_prediction_log,
)
from smokesense.model.checkpoint import build_model, save_checkpoint
from smokesense.model.network import ModelConfig
from smokesense.training.loop import (
    ARM_NAMES,
    PreparedData,
    TrainConfig,
    predict_fires,
    train_arm,
    train_vanilla,
)

SUITE_TABLE_FILENAME = "suite_table.csv"
RUNS_FILENAME = "runs.csv"
CHECKPOINT_DIRNAME = "checkpoints"
PREDICTION_DIRNAME = "predictions"
PLOT_DIRNAME = "plots"

RUN_COLUMNS = (
    "seed",
    "arm",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "mean_ttd",
    "n_detected",
    "n_censored",
    "n_rows",
)


@dataclass(frozen=True)
class ExperimentConfig:
    vanilla_config: ModelConfig
    fused_config: ModelConfig
    stage1: TrainConfig
    stage2: TrainConfig
    seeds: tuple[int, ...] = (0, 1, 2)
    arms: tuple[str, ...] = ARM_NAMES
    make_plots: bool = True

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "arms", tuple(self.arms))
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"duplicate seeds: {self.seeds}")
        if not self.arms:
            raise ValueError("at least one arm is required")
        unknown = [a for a in self.arms if a not in ARM_NAMES]
        if unknown:
            raise ValueError(f"unknown arms {unknown}, expected a subset of {ARM_NAMES}")
        if self.vanilla_config.fusion_enabled:
            raise ValueError("the stage-one config must have fusion disabled")
        if not self.fused_config.fusion_enabled:
            raise ValueError("the stage-two config must have fusion enabled")


@dataclass(frozen=True)
class RunRecord:
    seed: int
    arm: str
    report: MetricsReport


@dataclass(frozen=True)
class SuiteResult:
    runs: tuple[RunRecord, ...]
    table: Mapping[str, Mapping[str, tuple[float | None, float | None]]]
    out_dir: Path


def stage1_checkpoint_path(out_dir, seed: int) -> Path:
    return Path(out_dir) / CHECKPOINT_DIRNAME / f"stage1_seed{seed}.npz"


def arm_checkpoint_path(out_dir, arm: str, seed: int) -> Path:
    return Path(out_dir) / CHECKPOINT_DIRNAME / f"{arm}_seed{seed}.npz"


def prediction_log_path(out_dir, arm: str, seed: int) -> Path:
    return Path(out_dir) / PREDICTION_DIRNAME / f"{arm}_seed{seed}.csv"


def _format(value) -> str:
    return "" if value is None else repr(float(value))


def _parse(text: str):
    return None if text == "" else float(text)


def write_runs(path, runs: Sequence[RunRecord]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RUN_COLUMNS)
        for run in runs:
            r = run.report
            writer.writerow(
                [
                    run.seed,
                    run.arm,
                    _format(r.accuracy),
                    _format(r.precision),
                    _format(r.recall),
                    _format(r.f1),
                    _format(r.mean_ttd),
                    r.n_detected,
                    r.n_censored,
                    r.n_rows,
                ]
            )


def read_runs(path) -> list[RunRecord]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no runs file at {path}")
    runs = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != list(RUN_COLUMNS):
            raise ValueError(f"unexpected runs header: {reader.fieldnames}")
        for rec in reader:
            runs.append(
                RunRecord(
                    seed=int(rec["seed"]),
                    arm=rec["arm"],
                    report=MetricsReport(
                        accuracy=float(rec["accuracy"]),
                        precision=float(rec["precision"]),
                        recall=float(rec["recall"]),
                        f1=float(rec["f1"]),
                        mean_ttd=_parse(rec["mean_ttd"]),
                        n_detected=int(rec["n_detected"]),
                        n_censored=int(rec["n_censored"]),
                        n_rows=int(rec["n_rows"]),
                    ),
                )
            )
    return runs


def suite_table_columns() -> list[str]:
    columns = ["arm"]
    for metric in REPORT_METRICS:
        columns.extend([f"{metric}_mean", f"{metric}_sd"])
    return columns


def write_suite_table(path, table, arms: Sequence[str]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(suite_table_columns())
        for arm in arms:
            row = [arm]
            for metric in REPORT_METRICS:
                mean, sd = table[arm][metric]
                row.extend([_format(mean), _format(sd)])
            writer.writerow(row)


def read_suite_table(path) -> dict[str, dict[str, tuple[float | None, float | None]]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no suite table at {path}")
    table: dict[str, dict[str, tuple[float | None, float | None]]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != suite_table_columns():
            raise ValueError(f"unexpected suite table header: {reader.fieldnames}")
        for rec in reader:
            table[rec["arm"]] = {
                metric: (_parse(rec[f"{metric}_mean"]), _parse(rec[f"{metric}_sd"]))
                for metric in REPORT_METRICS
            }
    return table


def _plot_suite(table, runs: Sequence[RunRecord], out_dir: Path, arms: Sequence[str]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = out_dir / PLOT_DIRNAME
    plot_dir.mkdir(parents=True, exist_ok=True)

    for metric, filename, ylabel in (
        ("f1", "f1_by_arm.png", "image-level F1 on test fires"),
        ("mean_ttd", "time_to_detection.png", "mean minutes to detection"),
    ):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        xs = range(len(arms))
        means = [table[arm][metric][0] for arm in arms]
        sds = [table[arm][metric][1] for arm in arms]
        heights = [0.0 if m is None else m for m in means]
        errors = [0.0 if s is None else s for s in sds]
        ax.bar(xs, heights, yerr=errors, capsize=4, color="#7aa6c2")
        for i, arm in enumerate(arms):
            points = [
                r.report.f1 if metric == "f1" else r.report.mean_ttd
                for r in runs
                if r.arm == arm
            ]
            points = [p for p in points if p is not None]
            ax.plot([i] * len(points), points, "ko", markersize=3)
        ax.set_xticks(list(xs))
        ax.set_xticklabels(arms)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        fig.savefig(plot_dir / filename, dpi=120)
        plt.close(fig)


def run_experiment_suite(data: PreparedData, config: ExperimentConfig, out_dir) -> SuiteResult:
    """Train every (seed, arm) run, score it on the test fires, and write
    checkpoints, prediction logs, per-run metrics, and the aggregate table."""
    if not data.split("test"):
        raise ValueError("no fires in the test split to score against")
    out_dir = Path(out_dir)
    (out_dir / CHECKPOINT_DIRNAME).mkdir(parents=True, exist_ok=True)
    (out_dir / PREDICTION_DIRNAME).mkdir(parents=True, exist_ok=True)

    runs: list[RunRecord] = []
    for seed in config.seeds:
        stage1_cfg = dataclasses.replace(config.stage1, seed=seed)
        stage2_cfg = dataclasses.replace(config.stage2, seed=seed)
        stage_one = train_vanilla(data, config.vanilla_config, stage1_cfg)
        save_checkpoint(stage_one.checkpoint, stage1_checkpoint_path(out_dir, seed))
        for arm in config.arms:
            result = train_arm(arm, stage_one.checkpoint, config.fused_config, data, stage2_cfg)
            save_checkpoint(result.checkpoint, arm_checkpoint_path(out_dir, arm, seed))
            model = build_model(result.checkpoint)
            rows = predict_fires(model, data.split("test"), stage2_cfg, arm)
            write_prediction_log(prediction_log_path(out_dir, arm, seed), rows)
            report = MetricsReport.from_rows(rows, threshold=stage2_cfg.threshold)
            runs.append(RunRecord(seed=seed, arm=arm, report=report))

    table = {
        arm: aggregate_runs([r.report for r in runs if r.arm == arm])
        for arm in config.arms
    }
    write_runs(out_dir / RUNS_FILENAME, runs)
    write_suite_table(out_dir / SUITE_TABLE_FILENAME, table, arms=config.arms)
    if config.make_plots:
        _plot_suite(table, runs, out_dir, config.arms)
    return SuiteResult(runs=tuple(runs), table=table, out_dir=out_dir)
