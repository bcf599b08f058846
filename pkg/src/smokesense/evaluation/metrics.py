"""Detection metrics over per-frame prediction logs.

A prediction log has one row per (fire, minute offset) with the model's
image-level smoke probability and the ground-truth label. From it we compute
classification metrics at a threshold and, per fire, the time to detection:
the first minute at or after ignition whose probability clears the threshold.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from smokesense.data.sequences import offset_tag

# a fire's positive phase spans minutes 0..39; detection later than that
# horizon is treated as a miss (censored)
DETECTION_HORIZON_MINUTES = 40

PREDICTION_COLUMNS = ("fire_id", "offset", "probability", "label")

REPORT_METRICS = ("accuracy", "precision", "recall", "f1", "mean_ttd")


@dataclass(frozen=True)
class PredictionRow:
    """One scored frame: the model's image probability and the true label."""

    fire_id: str
    offset: int
    probability: float
    label: bool

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")


def write_prediction_log(path, rows: Sequence[PredictionRow]) -> None:
    """CSV with repr-formatted probabilities so reading back is lossless."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(PREDICTION_COLUMNS)
        for r in rows:
            writer.writerow([r.fire_id, r.offset, repr(r.probability), int(r.label)])


def read_prediction_log(path) -> list[PredictionRow]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no prediction log at {path}")
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != list(PREDICTION_COLUMNS):
            raise ValueError(f"unexpected prediction log header: {reader.fieldnames}")
        for rec in reader:
            rows.append(
                PredictionRow(
                    fire_id=rec["fire_id"],
                    offset=int(rec["offset"]),
                    probability=float(rec["probability"]),
                    label=bool(int(rec["label"])),
                )
            )
    return rows


# ------------------------------------------------------------- classification


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_counts(probabilities, labels, threshold: float = 0.5) -> ConfusionCounts:
    """Counts at a decision threshold; predicted positive iff p >= threshold."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"probabilities {p.shape} and labels {y.shape} must be equal 1-D")
    if p.size == 0:
        raise ValueError("cannot compute a confusion matrix with no predictions")
    pred = p >= threshold
    return ConfusionCounts(
        tp=int(np.sum(pred & y)),
        fp=int(np.sum(pred & ~y)),
        fn=int(np.sum(~pred & y)),
        tn=int(np.sum(~pred & ~y)),
    )


@dataclass(frozen=True)
class PRFMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float


def prf_metrics(counts: ConfusionCounts) -> PRFMetrics:
    """Accuracy, precision, recall, F1; zero denominators score 0.0."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRFMetrics(
        accuracy=(counts.tp + counts.tn) / counts.total,
        precision=precision,
        recall=recall,
        f1=f1,
    )


# --------------------------------------------------------- time to detection


@dataclass(frozen=True)
class DetectionTiming:
    """Per-fire first-detection minutes; censored fires never alerted."""

    mean_minutes: float | None
    n_detected: int
    n_censored: int
    per_fire: Mapping[str, int | None]


def time_to_detection(rows: Sequence[PredictionRow], threshold: float = 0.5) -> DetectionTiming:
    """First minute >= 0 whose probability clears the threshold, per fire.

    Every fire in the log must carry its complete positive phase (offsets
    0..39); fires whose probability never clears the threshold inside the
    horizon are censored and excluded from the mean.
    """
    by_fire: dict[str, dict[int, float]] = {}
    for r in rows:
        by_fire.setdefault(r.fire_id, {})[r.offset] = r.probability
    if not by_fire:
        raise ValueError("cannot compute time to detection from an empty log")
    per_fire: dict[str, int | None] = {}
    for fire_id in sorted(by_fire):
        offsets = by_fire[fire_id]
        missing = [o for o in range(DETECTION_HORIZON_MINUTES) if o not in offsets]
        if missing:
            raise ValueError(
                f"fire {fire_id} is missing positive-phase offsets "
                f"{[offset_tag(o) for o in missing[:3]]}"
            )
        detected = [o for o in range(DETECTION_HORIZON_MINUTES) if offsets[o] >= threshold]
        per_fire[fire_id] = detected[0] if detected else None
    hits = [m for m in per_fire.values() if m is not None]
    return DetectionTiming(
        mean_minutes=float(np.mean(hits)) if hits else None,
        n_detected=len(hits),
        n_censored=len(per_fire) - len(hits),
        per_fire=per_fire,
    )


# -------------------------------------------------------------------- reports


@dataclass(frozen=True)
class MetricsReport:
    """One run's summary: frame classification plus detection timing."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    mean_ttd: float | None
    n_detected: int
    n_censored: int
    n_rows: int

    @classmethod
    def from_rows(cls, rows: Sequence[PredictionRow], threshold: float = 0.5) -> "MetricsReport":
        counts = confusion_counts(
            [r.probability for r in rows], [r.label for r in rows], threshold
        )
        prf = prf_metrics(counts)
        timing = time_to_detection(rows, threshold)
        return cls(
            accuracy=prf.accuracy,
            precision=prf.precision,
            recall=prf.recall,
            f1=prf.f1,
            mean_ttd=timing.mean_minutes,
            n_detected=timing.n_detected,
            n_censored=timing.n_censored,
            n_rows=len(rows),
        )


def aggregate_runs(reports: Sequence[MetricsReport]) -> dict[str, tuple[float | None, float | None]]:
    """Mean and sample SD of each metric across repeated runs.

    A single run has SD 0.0 by convention. If any run's mean TTD is undefined
    (every fire censored), the aggregate TTD is (None, None).
    """
    if not reports:
        raise ValueError("cannot aggregate zero runs")
    out: dict[str, tuple[float | None, float | None]] = {}
    for name in REPORT_METRICS:
        values = [getattr(r, name) for r in reports]
        if any(v is None for v in values):
            out[name] = (None, None)
            continue
        arr = np.asarray(values, dtype=np.float64)
        sd = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
        out[name] = (float(arr.mean()), sd)
    return out
