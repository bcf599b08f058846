"""Self-describing model checkpoints.

A checkpoint bundles every parameter array with the model configuration,
the training stage, the best validation loss, and (optionally) the
training RNG state, so a model can be rebuilt from the file alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from smokesense.model.network import (
    STAGE_MULTIMODAL,
    STAGE_VANILLA,
    ModelConfig,
    SmokeDetector,
)

CHECKPOINT_VERSION = 1
_STAGES = (STAGE_VANILLA, STAGE_MULTIMODAL)


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    config: ModelConfig
    stage: str
    val_loss: float
    rng_state: dict | None = None
    version: int = CHECKPOINT_VERSION

    def __post_init__(self):
        if self.stage not in _STAGES:
            raise ValueError(f"unknown stage {self.stage!r}, expected one of {_STAGES}")


def checkpoint_from_model(
    model: SmokeDetector,
    stage: str,
    val_loss: float,
    rng_state: dict | None = None,
) -> Checkpoint:
    params = {name: p.value.copy() for name, p in model.named_parameters()}
    return Checkpoint(params=params, config=model.config, stage=stage,
                      val_loss=float(val_loss), rng_state=rng_state)


def build_model(checkpoint: Checkpoint) -> SmokeDetector:
    """Construct a model from a checkpoint's config and load its weights."""
    model = SmokeDetector(checkpoint.config, seed_or_rng=0)
    model_params = dict(model.named_parameters())
    missing = sorted(set(model_params) - set(checkpoint.params))
    extra = sorted(set(checkpoint.params) - set(model_params))
    if missing or extra:
        raise ValueError(
            f"checkpoint does not match model: missing {missing}, unexpected {extra}"
        )
    for name, param in model_params.items():
        stored = checkpoint.params[name]
        if stored.shape != param.value.shape:
            raise ValueError(
                f"parameter {name} has shape {stored.shape}, expected {param.value.shape}"
            )
        param.value = stored.astype(np.float64).copy()
    return model


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    config_dict = asdict(checkpoint.config)
    config_dict["backbone_channels"] = list(config_dict["backbone_channels"])
    meta = {
        "version": checkpoint.version,
        "stage": checkpoint.stage,
        "val_loss": checkpoint.val_loss,
        "config": config_dict,
        "rng_state": checkpoint.rng_state,
    }
    arrays = {f"param.{name}": value for name, value in checkpoint.params.items()}
    arrays["__meta__"] = np.array(json.dumps(meta))
    # write through a handle so numpy cannot append its own .npz suffix
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data:
            raise ValueError(f"{path} is not a model checkpoint (no metadata entry)")
        meta = json.loads(str(data["__meta__"]))
        params = {
            key[len("param."):]: data[key].astype(np.float64)
            for key in data.files
            if key.startswith("param.")
        }
    version = meta.get("version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    config_dict = dict(meta["config"])
    config_dict["backbone_channels"] = tuple(config_dict["backbone_channels"])
    return Checkpoint(
        params=params,
        config=ModelConfig(**config_dict),
        stage=meta["stage"],
        val_loss=float(meta["val_loss"]),
        rng_state=meta.get("rng_state"),
        version=version,
    )


def init_from_vanilla(vanilla: Checkpoint, config: ModelConfig, seed: int = 0) -> Checkpoint:
    """Turn a weather-free checkpoint into a weather-fused one.

    Every shared parameter is copied verbatim.  The fusion blocks are the
    only new parameters: their embedding columns start as the identity so
    the fused model initially reproduces the vanilla model, and their
    weather columns start at zero (test mode) or small random values.
    """
    if vanilla.stage != STAGE_VANILLA:
        raise ValueError(f"expected a {STAGE_VANILLA!r} checkpoint, got {vanilla.stage!r}")
    if not config.fusion_enabled:
        raise ValueError("target config must have fusion_enabled")
    src = vanilla.config
    for name in (
        "tile_size", "grid_rows", "grid_cols", "backbone_channels",
        "backbone_embed_dim", "temporal_hidden_dim", "spatial_token_dim",
        "n_heads", "n_transformer_layers",
    ):
        if getattr(src, name) != getattr(config, name):
            raise ValueError(
                f"architecture mismatch on {name}: "
                f"{getattr(src, name)} != {getattr(config, name)}"
            )

    model = SmokeDetector(config, seed_or_rng=np.random.default_rng(seed))
    model_params = dict(model.named_parameters())
    fusion_names = {n for n in model_params if n.startswith(("fusion_cnn.", "fusion_lstm."))}
    expected_shared = set(model_params) - fusion_names
    if expected_shared != set(vanilla.params):
        missing = sorted(expected_shared - set(vanilla.params))
        extra = sorted(set(vanilla.params) - expected_shared)
        raise ValueError(
            f"vanilla checkpoint does not match target model: "
            f"missing {missing}, unexpected {extra}"
        )
    for name in expected_shared:
        stored = vanilla.params[name]
        if stored.shape != model_params[name].value.shape:
            raise ValueError(
                f"parameter {name} has shape {stored.shape}, "
                f"expected {model_params[name].value.shape}"
            )
        model_params[name].value = stored.astype(np.float64).copy()

    rng = np.random.default_rng(seed)
    for block in (model.fusion_cnn, model.fusion_lstm):
        if config.fusion_test_mode:
            block.set_test_mode_weights()
        else:
            block.set_transfer_weights(rng)

    return checkpoint_from_model(model, STAGE_MULTIMODAL, vanilla.val_loss)
