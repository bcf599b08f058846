"""Declarative run configuration with dotted-path overrides.

A PipelineConfig gathers every knob of the pipeline - synthetic corpus,
model dimensions, both training stages, and the experiment suite - with
desk-scale defaults. Overrides arrive as `section.key=value` strings or a
YAML mapping of the same shape; values are coerced against the type of the
field they replace, so `stage1.epochs=5` is an int and
`model.backbone_channels=16,32` a tuple.
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from smokesense.data.synthetic import SyntheticSpec
from smokesense.imaging.tiling import TileGeometry
from smokesense.model.network import ModelConfig
from smokesense.training.experiment import ExperimentConfig
from smokesense.training.loop import ARM_NAMES, TrainConfig

_TRUE_WORDS = {"true", "yes", "on", "1"}
_FALSE_WORDS = {"false", "no", "off", "0"}
_NONE_WORDS = {"none", "null", ""}


@dataclass(frozen=True)
class DataConfig:
    """Synthetic corpus parameters (see SyntheticSpec for their meaning)."""

    n_fires: int = 20
    coupling: str = "discriminative"
    seed: int = 0
    image_h: int = 60
    image_w: int = 88
    tile: int = 32
    stride: int = 28
    stations_per_fire: int = 3
    jpeg_quality: int = 92

    def spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n_fires=self.n_fires,
            image_h=self.image_h,
            image_w=self.image_w,
            tile=self.tile,
            stride=self.stride,
            coupling=self.coupling,
            seed=self.seed,
            jpeg_quality=self.jpeg_quality,
            stations_per_fire=self.stations_per_fire,
        )

    def geometry(self) -> TileGeometry:
        return TileGeometry(
            image_h=self.image_h, image_w=self.image_w, tile=self.tile, stride=self.stride
        )


@dataclass(frozen=True)
class ModelSection:
    """Detector dimensions; the vanilla and fused variants share them."""

    tile_size: int = 32
    grid_rows: int = 2
    grid_cols: int = 3
    backbone_channels: tuple[int, ...] = (16, 32)
    backbone_embed_dim: int = 32
    temporal_hidden_dim: int = 32
    spatial_token_dim: int = 32
    n_heads: int = 4
    n_transformer_layers: int = 1
    weather_dim: int = 8
    replication_factor: int = 10
    fusion_test_mode: bool = False

    def _shared(self) -> dict:
        return dict(
            tile_size=self.tile_size,
            grid_rows=self.grid_rows,
            grid_cols=self.grid_cols,
            backbone_channels=tuple(self.backbone_channels),
            backbone_embed_dim=self.backbone_embed_dim,
            temporal_hidden_dim=self.temporal_hidden_dim,
            spatial_token_dim=self.spatial_token_dim,
            n_heads=self.n_heads,
            n_transformer_layers=self.n_transformer_layers,
            weather_dim=self.weather_dim,
            replication_factor=self.replication_factor,
        )

    def vanilla(self) -> ModelConfig:
        return ModelConfig(**self._shared())

    def fused(self) -> ModelConfig:
        return ModelConfig(
            **self._shared(), fusion_enabled=True, fusion_test_mode=self.fusion_test_mode
        )


@dataclass(frozen=True)
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelSection = field(default_factory=ModelSection)
    stage1: TrainConfig = field(default_factory=TrainConfig)
    stage2: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple[int, ...] = (0, 1, 2)
    arms: tuple[str, ...] = ARM_NAMES
    make_plots: bool = True
    k_stations: int = 3

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(
            vanilla_config=self.model.vanilla(),
            fused_config=self.model.fused(),
            stage1=self.stage1,
            stage2=self.stage2,
            seeds=tuple(self.seeds),
            arms=tuple(self.arms),
            make_plots=self.make_plots,
        )


def default_config() -> PipelineConfig:
    return PipelineConfig()


# ------------------------------------------------------------------ overrides


def _is_optional(annotation) -> bool:
    """Whether a field annotation admits None (e.g. `float | None`)."""
    if isinstance(annotation, str):
        return "None" in annotation
    import types
    import typing

    origin = typing.get_origin(annotation)
    return origin in (typing.Union, types.UnionType) and type(None) in typing.get_args(
        annotation
    )


def _coerce(raw: str, current, annotation, path: str):
    raw = raw.strip()
    if raw.lower() in _NONE_WORDS and (current is None or _is_optional(annotation)):
        return None
    if current is None:
        try:
            return float(raw)
        except ValueError as e:
            raise ValueError(f"{path}: cannot parse '{raw}' for an optional number") from e
    if isinstance(current, bool):
        word = raw.lower()
        if word in _TRUE_WORDS:
            return True
        if word in _FALSE_WORDS:
            return False
        raise ValueError(f"{path}: expected a boolean, got '{raw}'")
    if isinstance(current, int):
        try:
            return int(raw)
        except ValueError as e:
            raise ValueError(f"{path}: expected an integer, got '{raw}'") from e
    if isinstance(current, float):
        try:
            return float(raw)
        except ValueError as e:
            raise ValueError(f"{path}: expected a number, got '{raw}'") from e
    if isinstance(current, tuple):
        items = [part.strip() for part in raw.split(",") if part.strip()]
        element = current[0] if current else ""
        return tuple(_coerce(item, element, None, path) for item in items)
    if isinstance(current, str):
        return raw
    raise ValueError(f"{path}: field of type {type(current).__name__} cannot be overridden")


def _set_path(obj, parts: Sequence[str], raw: str, path: str):
    if not dataclasses.is_dataclass(obj):
        raise ValueError(f"{path}: '{'.'.join(parts)}' does not name a config field")
    name = parts[0]
    by_name = {f.name: f for f in dataclasses.fields(obj)}
    if name not in by_name:
        raise ValueError(
            f"unknown config key '{name}' in '{path}'; valid keys: {', '.join(by_name)}"
        )
    current = getattr(obj, name)
    if len(parts) > 1:
        return dataclasses.replace(obj, **{name: _set_path(current, parts[1:], raw, path)})
    return dataclasses.replace(obj, **{name: _coerce(raw, current, by_name[name].type, path)})


def apply_overrides(config: PipelineConfig, assignments: Sequence[str]) -> PipelineConfig:
    """Apply `dotted.path=value` assignments, left to right."""
    for assignment in assignments:
        if "=" not in assignment:
            raise ValueError(f"override '{assignment}' is not of the form key=value")
        key, raw = assignment.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"override '{assignment}' has an empty key")
        config = _set_path(config, key.split("."), raw, key)
    return config


def _flatten(mapping: dict, prefix: str = "") -> list[str]:
    assignments = []
    for key, value in mapping.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            assignments.extend(_flatten(value, prefix=f"{path}."))
        elif isinstance(value, (list, tuple)):
            assignments.append(f"{path}={','.join(str(v) for v in value)}")
        elif value is None:
            assignments.append(f"{path}=none")
        else:
            assignments.append(f"{path}={value}")
    return assignments


def load_config_file(path) -> list[str]:
    """A YAML mapping of (possibly nested) config keys, as override strings."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no config file at {path}")
    loaded = yaml.safe_load(path.read_text())
    if loaded is None:
        return []
    if not isinstance(loaded, dict):
        raise ValueError(f"config file {path} must hold a mapping, got {type(loaded).__name__}")
    return _flatten(loaded)


def resolve_config(config_file=None, overrides: Sequence[str] = ()) -> PipelineConfig:
    """Defaults, then the config file, then explicit overrides (which win)."""
    config = default_config()
    if config_file is not None:
        config = apply_overrides(config, load_config_file(config_file))
    return apply_overrides(config, overrides)
