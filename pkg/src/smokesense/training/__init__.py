"""Losses, the optimizer, and the two-stage training engine."""

from smokesense.training.losses import (
    LossBreakdown,
    LossConfig,
    bce_with_logits,
    compute_losses,
)
from smokesense.training.loop import (
    ARM_BASELINE,
    ARM_NAMES,
    ARM_RANDOM,
    ARM_REAL,
    RANDOM_EVAL_EPOCH,
    EarlyStopPolicy,
    EpochStats,
    EvalResult,
    FireData,
    PreparedData,
    TrainConfig,
    TrainResult,
    check_geometry,
    evaluate_split,
    predict_fires,
    prepare_data,
    train_arm,
    train_epoch,
    train_model,
    train_vanilla,
    two_stage_train,
)
from smokesense.training.experiment import (
    RUNS_FILENAME,
    SUITE_TABLE_FILENAME,
    ExperimentConfig,
    RunRecord,
    SuiteResult,
    arm_checkpoint_path,
    prediction_log_path,
    read_runs,
    read_suite_table,
    run_experiment_suite,
    stage1_checkpoint_path,
    write_runs,
    write_suite_table,
)
from smokesense.training.optim import AdamW

__all__ = [
    "RUNS_FILENAME",
    "SUITE_TABLE_FILENAME",
    "ExperimentConfig",
    "RunRecord",
    "SuiteResult",
    "arm_checkpoint_path",
    "prediction_log_path",
    "read_runs",
    "read_suite_table",
    "run_experiment_suite",
    "stage1_checkpoint_path",
    "write_runs",
    "write_suite_table",
    "ARM_BASELINE",
    "ARM_NAMES",
    "ARM_RANDOM",
    "ARM_REAL",
    "RANDOM_EVAL_EPOCH",
    "AdamW",
    "EarlyStopPolicy",
    "EpochStats",
    "EvalResult",
    "FireData",
    "LossBreakdown",
    "LossConfig",
    "PreparedData",
    "TrainConfig",
    "TrainResult",
    "bce_with_logits",
    "check_geometry",
    "compute_losses",
    "evaluate_split",
    "predict_fires",
    "prepare_data",
    "train_arm",
    "train_epoch",
    "train_model",
    "train_vanilla",
    "two_stage_train",
]
