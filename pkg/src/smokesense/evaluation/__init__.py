"""Detection metrics and report aggregation."""

from smokesense.evaluation.metrics import (
    DETECTION_HORIZON_MINUTES,
    PREDICTION_COLUMNS,
    REPORT_METRICS,
    ConfusionCounts,
    DetectionTiming,
    MetricsReport,
    PredictionRow,
    PRFMetrics,
    aggregate_runs,
    confusion_counts,
    prf_metrics,
    read_prediction_log,
    time_to_detection,
    write_prediction_log,
)

__all__ = [
    "DETECTION_HORIZON_MINUTES",
    "PREDICTION_COLUMNS",
    "REPORT_METRICS",
    "ConfusionCounts",
    "DetectionTiming",
    "MetricsReport",
    "PredictionRow",
    "PRFMetrics",
    "aggregate_runs",
    "confusion_counts",
    "prf_metrics",
    "read_prediction_log",
    "time_to_detection",
    "write_prediction_log",
]
