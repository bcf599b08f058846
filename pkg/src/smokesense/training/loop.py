"""Training engine: mini-batch optimization with validation-selected
checkpoints, early stopping, two-stage transfer, and the weather-source
control arms (real station data, random vectors, or no weather at all)."""

import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from smokesense.data.manifest import MANIFEST_FILENAME, ManifestEntry, read_manifest
from smokesense.data.samples import (
    AlignedSample,
    align_weather_to_frames,
    pair_consecutive_frames,
    stack_samples,
)
from smokesense.data.sequences import FireSequence, load_fire_masks, load_fire_sequence
from smokesense.data.synthetic import WEATHER_DIRNAME
from smokesense.evaluation.metrics import PredictionRow, confusion_counts, prf_metrics
from smokesense.imaging.augment import sample_augment
from smokesense.imaging.tiling import FULL_GEOMETRY, TileGeometry
from smokesense.model.checkpoint import Checkpoint, build_model, init_from_vanilla
from smokesense.model.network import (
    STAGE_MULTIMODAL,
    STAGE_VANILLA,
    ModelConfig,
    SmokeDetector,
)
from smokesense.training.losses import LossConfig, compute_losses
from smokesense.training.optim import AdamW
from smokesense.weather.pipeline import WeatherStats, normalize_weather, random_weather_vector
from smokesense.weather.store import SeriesStore

# the three weather-source arms: the trained-from-stations model, the
# random-vector control, and the image-only control
ARM_REAL = "real"
ARM_RANDOM = "random"
ARM_BASELINE = "baseline"
ARM_NAMES = (ARM_BASELINE, ARM_RANDOM, ARM_REAL)

# rng stream tags, distinct so derived generators never collide
_STREAM_SHUFFLE = 31
_STREAM_AUGMENT = 37
_STREAM_RANDOM_WEATHER = 41

# epoch key reserved for evaluation-time random-arm draws, so the control
# model is always scored against the same vectors
RANDOM_EVAL_EPOCH = -1


def _fire_key(fire_id: str) -> int:
    """Stable integer identity for seeding per-fire rng streams."""
    return zlib.crc32(fire_id.encode("utf-8"))


# ----------------------------------------------------------------- containers


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 1e-3
    weight_decay: float = 1e-3
    patience: int = 4
    min_delta: float = 0.0
    seed: int = 0
    augment: bool = False
    min_epochs: int = 1
    target_train_f1: float | None = None
    threshold: float = 0.5
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        for name in ("epochs", "batch_size", "min_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.patience < 1:
            raise ValueError(f"patience must be at least 1, got {self.patience}")
        if self.min_delta < 0:
            raise ValueError(f"min_delta must be non-negative, got {self.min_delta}")
        if self.target_train_f1 is not None and not 0.0 < self.target_train_f1 <= 1.0:
            raise ValueError(f"target_train_f1 {self.target_train_f1} outside (0, 1]")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold {self.threshold} outside (0, 1)")


@dataclass(frozen=True)
class FireData:
    """One fire's raw material plus its precomputed (unaugmented) samples."""

    fire_id: str
    split: str
    sequence: FireSequence
    masks: Mapping[int, np.ndarray] | None
    weather: tuple  # normalized WeatherVector per frame
    samples: tuple[AlignedSample, ...]


@dataclass(frozen=True)
class PreparedData:
    """Every fire's samples, grouped by split, with the weather normalizer."""

    fires: tuple[FireData, ...]
    stats: WeatherStats
    geometry: TileGeometry

    def split(self, name: str) -> tuple[FireData, ...]:
        return tuple(f for f in self.fires if f.split == name)


def prepare_data(
    root,
    geometry: TileGeometry = FULL_GEOMETRY,
    k: int = 3,
    use_masks: bool = True,
    entries: Sequence[ManifestEntry] | None = None,
) -> PreparedData:
    """Load a corpus directory into memory, ready for training.

    Weather statistics are fit on the training split only and applied
    everywhere, so validation and test stay untouched by their own scale.
    """
    root = Path(root)
    if entries is None:
        entries = read_manifest(root / MANIFEST_FILENAME)
    if any(not e.split for e in entries):
        raise ValueError("every manifest entry needs a split before training")
    store = SeriesStore.from_dir(root / WEATHER_DIRNAME)

    sequences, masks_by_fire, raw_weather = {}, {}, {}
    for entry in entries:
        seq = load_fire_sequence(entry, root)
        sequences[entry.fire_id] = seq
        masks_by_fire[entry.fire_id] = load_fire_masks(entry, root) if use_masks else None
        raw_weather[entry.fire_id] = align_weather_to_frames(seq, store.registry, store, k=k)

    train_vectors = [
        v for e in entries if e.split == "train" for v in raw_weather[e.fire_id]
    ]
    if not train_vectors:
        raise ValueError("no training-split fires to fit weather statistics on")
    stats = WeatherStats.fit(train_vectors)

    fires = []
    for entry in entries:
        vectors = [normalize_weather(v, stats) for v in raw_weather[entry.fire_id]]
        samples = pair_consecutive_frames(
            sequences[entry.fire_id], vectors, geometry, masks=masks_by_fire[entry.fire_id]
        )
        fires.append(
            FireData(
                fire_id=entry.fire_id,
                split=entry.split,
                sequence=sequences[entry.fire_id],
                masks=masks_by_fire[entry.fire_id],
                weather=tuple(vectors),
                samples=tuple(samples),
            )
        )
    return PreparedData(fires=tuple(fires), stats=stats, geometry=geometry)


# -------------------------------------------------------------------- batches


def check_geometry(model: SmokeDetector, data: PreparedData) -> None:
    cfg, geom = model.config, data.geometry
    if (cfg.tile_size, cfg.grid_rows, cfg.grid_cols) != (geom.tile, geom.rows, geom.cols):
        raise ValueError(
            f"model expects {cfg.grid_rows}x{cfg.grid_cols} tiles of {cfg.tile_size}px "
            f"but the data is {geom.rows}x{geom.cols} tiles of {geom.tile}px"
        )


def _batch_weather(samples: Sequence[AlignedSample], arm: str, seed: int, epoch: int):
    """The weather matrix a batch sees under the given arm, or None."""
    if arm == ARM_BASELINE:
        return None
    if arm == ARM_REAL:
        return np.stack([s.weather.values for s in samples])
    if arm == ARM_RANDOM:
        return np.stack(
            [
                random_weather_vector(
                    [seed, _STREAM_RANDOM_WEATHER, epoch + 1, _fire_key(s.fire_id), s.offset + 40],
                    s.weather.timestamp,
                ).values
                for s in samples
            ]
        )
    raise ValueError(f"unknown arm '{arm}', expected one of {ARM_NAMES}")


def _fire_samples(fire: FireData, config: TrainConfig, geometry: TileGeometry, epoch: int):
    """A fire's samples for one training epoch (fresh augmentation draw if on)."""
    if not config.augment:
        return fire.samples
    params = sample_augment(
        np.random.default_rng([config.seed, _STREAM_AUGMENT, epoch, _fire_key(fire.fire_id)])
    )
    return tuple(
        pair_consecutive_frames(
            fire.sequence,
            list(fire.weather),
            geometry,
            masks=fire.masks,
            augment_params=params,
        )
    )


def _iter_eval_batches(fires: Sequence[FireData], batch_size: int):
    for fire in fires:
        for start in range(0, len(fire.samples), batch_size):
            yield list(fire.samples[start : start + batch_size])


# ------------------------------------------------------------ train and score


def train_epoch(
    model: SmokeDetector,
    optimizer: AdamW,
    fires: Sequence[FireData],
    config: TrainConfig,
    geometry: TileGeometry,
    arm: str,
    epoch: int,
) -> float:
    """One pass over the training fires; returns the mean per-sample loss.

    Fire order and the sample order within each fire are reshuffled every
    epoch from the run seed, so identical seeds replay identical batches.
    """
    rng = np.random.default_rng([config.seed, _STREAM_SHUFFLE, epoch])
    total, count = 0.0, 0
    for fire_index in rng.permutation(len(fires)):
        fire = fires[fire_index]
        samples = _fire_samples(fire, config, geometry, epoch)
        order = rng.permutation(len(samples))
        for start in range(0, len(order), config.batch_size):
            batch = [samples[i] for i in order[start : start + config.batch_size]]
            prev, curr, _, tile_labels, image_labels = stack_samples(batch)
            weather = _batch_weather(batch, arm, config.seed, epoch)
            optimizer.zero_grad()
            try:
                output, cache = model.forward(prev, curr, weather)
                breakdown, grads = compute_losses(
                    output, tile_labels, image_labels, config.loss, with_grads=True
                )
                model.backward(grads, cache)
                optimizer.step()
            except ValueError as e:
                raise ValueError(f"training diverged in epoch {epoch} on fire {fire.fire_id}: {e}") from e
            total += breakdown.total * len(batch)
            count += len(batch)
    if count == 0:
        raise ValueError("no training samples")
    return total / count


@dataclass(frozen=True)
class EvalResult:
    loss: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    n_samples: int


def evaluate_split(
    model: SmokeDetector,
    fires: Sequence[FireData],
    config: TrainConfig,
    arm: str,
    epoch: int = RANDOM_EVAL_EPOCH,
) -> EvalResult:
    """Loss plus image-level classification metrics, without updating weights."""
    if not fires:
        raise ValueError("cannot evaluate on an empty split")
    total, count = 0.0, 0
    probabilities, labels = [], []
    for batch in _iter_eval_batches(fires, config.batch_size):
        prev, curr, _, tile_labels, image_labels = stack_samples(batch)
        weather = _batch_weather(batch, arm, config.seed, epoch)
        output, _ = model.forward(prev, curr, weather)
        breakdown = compute_losses(output, tile_labels, image_labels, config.loss)
        total += breakdown.total * len(batch)
        count += len(batch)
        probabilities.extend(output.image_probability.tolist())
        labels.extend(bool(v) for v in image_labels)
    prf = prf_metrics(confusion_counts(probabilities, labels, config.threshold))
    return EvalResult(
        loss=total / count,
        accuracy=prf.accuracy,
        precision=prf.precision,
        recall=prf.recall,
        f1=prf.f1,
        n_samples=count,
    )


def predict_fires(
    model: SmokeDetector,
    fires: Sequence[FireData],
    config: TrainConfig,
    arm: str,
) -> list[PredictionRow]:
    """One prediction row per (fire, offset), for metric reports."""
    rows = []
    for fire in fires:
        for start in range(0, len(fire.samples), config.batch_size):
            batch = list(fire.samples[start : start + config.batch_size])
            prev, curr, _, _, image_labels = stack_samples(batch)
            weather = _batch_weather(batch, arm, config.seed, RANDOM_EVAL_EPOCH)
            output, _ = model.forward(prev, curr, weather)
            rows.extend(
                PredictionRow(
                    fire_id=fire.fire_id,
                    offset=s.offset,
                    probability=float(p),
                    label=bool(y),
                )
                for s, p, y in zip(batch, output.image_probability, image_labels)
            )
    return rows


# ------------------------------------------------------------- stop criteria


class EarlyStopPolicy:
    """Stop after `patience` consecutive epochs without val-loss improvement."""

    def __init__(self, patience: int = 4, min_delta: float = 0.0):
        if patience < 1:
            raise ValueError(f"patience must be at least 1, got {patience}")
        if min_delta < 0:
            raise ValueError(f"min_delta must be non-negative, got {min_delta}")
        self.patience = patience
        self.min_delta = min_delta
        self.best = np.inf
        self.bad_epochs = 0

    def update(self, val_loss: float) -> bool:
        """Record one epoch's validation loss; True means it improved."""
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


# --------------------------------------------------------------- full training


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_f1: float
    train_f1: float | None = None


@dataclass(frozen=True)
class TrainResult:
    checkpoint: Checkpoint
    history: tuple[EpochStats, ...]
    initial_val_loss: float
    stop_reason: str
    arm: str

    @property
    def best_val_loss(self) -> float:
        return self.checkpoint.val_loss


def _snapshot(model: SmokeDetector) -> dict[str, np.ndarray]:
    return {name: p.value.copy() for name, p in model.named_parameters()}


def train_model(
    model: SmokeDetector,
    data: PreparedData,
    config: TrainConfig,
    arm: str = ARM_REAL,
    stage: str = STAGE_MULTIMODAL,
) -> TrainResult:
    """Fit the model on the train split, keeping the best-validation weights.

    The model is validated once before any update, so a transferred model's
    starting quality is recorded and a run that never improves still returns
    its initial weights as the checkpoint.
    """
    if arm not in ARM_NAMES:
        raise ValueError(f"unknown arm '{arm}', expected one of {ARM_NAMES}")
    if (arm == ARM_BASELINE) == model.config.fusion_enabled:
        raise ValueError(
            f"arm '{arm}' needs fusion_enabled={arm != ARM_BASELINE}, "
            f"got {model.config.fusion_enabled}"
        )
    check_geometry(model, data)
    train_fires = data.split("train")
    val_fires = data.split("val")
    if not train_fires:
        raise ValueError("no fires in the training split")

    optimizer = AdamW(
        model, lr=config.learning_rate, weight_decay=config.weight_decay
    )
    initial = evaluate_split(model, val_fires, config, arm)
    best_val, best_params = initial.loss, _snapshot(model)
    policy = EarlyStopPolicy(config.patience, config.min_delta)
    policy.update(initial.loss)

    history: list[EpochStats] = []
    stop_reason = "max_epochs"
    for epoch in range(1, config.epochs + 1):
        train_loss = train_epoch(model, optimizer, train_fires, config, data.geometry, arm, epoch)
        val = evaluate_split(model, val_fires, config, arm)
        train_f1 = None
        if config.target_train_f1 is not None:
            train_f1 = evaluate_split(model, train_fires, config, arm).f1
        history.append(
            EpochStats(
                epoch=epoch,
                train_loss=train_loss,
                val_loss=val.loss,
                val_f1=val.f1,
                train_f1=train_f1,
            )
        )
        if policy.update(val.loss):
            best_val, best_params = val.loss, _snapshot(model)
        if (
            train_f1 is not None
            and epoch >= config.min_epochs
            and train_f1 >= config.target_train_f1
        ):
            stop_reason = "target_f1"
            break
        if policy.should_stop:
            stop_reason = "early_stop"
            break

    checkpoint = Checkpoint(
        params=best_params, config=model.config, stage=stage, val_loss=best_val
    )
    return TrainResult(
        checkpoint=checkpoint,
        history=tuple(history),
        initial_val_loss=initial.loss,
        stop_reason=stop_reason,
        arm=arm,
    )


def train_vanilla(
    data: PreparedData, model_config: ModelConfig, config: TrainConfig
) -> TrainResult:
    """Stage one: the image-only model, no weather anywhere."""
    if model_config.fusion_enabled:
        raise ValueError("stage one trains without fusion")
    model = SmokeDetector(model_config, seed_or_rng=config.seed)
    return train_model(model, data, config, arm=ARM_BASELINE, stage=STAGE_VANILLA)


def train_arm(
    arm: str,
    vanilla: Checkpoint,
    fused_config: ModelConfig,
    data: PreparedData,
    config: TrainConfig,
) -> TrainResult:
    """Stage two under one weather arm, starting from the stage-one weights.

    The baseline arm keeps training the image-only model, so every arm gets
    the same epoch budget; the other two transfer into the fused model and
    differ only in where their weather vectors come from.
    """
    if arm == ARM_BASELINE:
        model = build_model(vanilla)
        return train_model(model, data, config, arm=arm, stage=STAGE_VANILLA)
    checkpoint = init_from_vanilla(vanilla, fused_config, seed=config.seed)
    model = build_model(checkpoint)
    return train_model(model, data, config, arm=arm, stage=STAGE_MULTIMODAL)


def two_stage_train(
    data: PreparedData,
    vanilla_config: ModelConfig,
    fused_config: ModelConfig,
    stage1: TrainConfig,
    stage2: TrainConfig,
    arm: str = ARM_REAL,
) -> tuple[TrainResult, TrainResult]:
    """The full curriculum: image-only training, then weather-fused training."""
    first = train_vanilla(data, vanilla_config, stage1)
    second = train_arm(arm, first.checkpoint, fused_config, data, stage2)
    return first, second
