"""Spatiotemporal smoke-detection model: layers, backbone, weather fusion,
full network, and checkpointing."""

from smokesense.model.backbone import Downsample, ResidualBlock, TileEncoder
from smokesense.model.checkpoint import (
    CHECKPOINT_VERSION,
    Checkpoint,
    build_model,
    checkpoint_from_model,
    init_from_vanilla,
    load_checkpoint,
    save_checkpoint,
)
from smokesense.model.fusion import FusionBlock, fuse_weather
from smokesense.model.layers import (
    LSTM2,
    Conv2d,
    LayerNorm,
    Linear,
    MultiHeadAttention,
    ReLU,
    TransformerBlock,
    sigmoid,
    softmax_last,
)
from smokesense.model.network import (
    STAGE_MULTIMODAL,
    STAGE_VANILLA,
    TOY_CONFIG,
    ModelConfig,
    ModelOutput,
    SmokeDetector,
)
from smokesense.model.params import Module, Parameter

__all__ = [
    "CHECKPOINT_VERSION",
    "Checkpoint",
    "Conv2d",
    "Downsample",
    "FusionBlock",
    "LSTM2",
    "LayerNorm",
    "Linear",
    "ModelConfig",
    "ModelOutput",
    "Module",
    "MultiHeadAttention",
    "Parameter",
    "ReLU",
    "ResidualBlock",
    "STAGE_MULTIMODAL",
    "STAGE_VANILLA",
    "SmokeDetector",
    "TOY_CONFIG",
    "TileEncoder",
    "TransformerBlock",
    "build_model",
    "checkpoint_from_model",
    "fuse_weather",
    "init_from_vanilla",
    "load_checkpoint",
    "save_checkpoint",
    "sigmoid",
    "softmax_last",
]
