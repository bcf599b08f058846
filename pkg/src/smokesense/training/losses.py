"""Binary cross-entropy losses over the four prediction heads.

All losses are computed from logits with log1p-style stability, so
saturated predictions (|logit| large) never produce inf or NaN. The
image head up-weights positives because most frames in a sequence
precede the ignition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from smokesense.model.layers import sigmoid
from smokesense.model.network import ModelOutput


@dataclass(frozen=True)
class LossConfig:
    image_positive_weight: float = 5.0
    cnn_weight: float = 1.0
    temporal_weight: float = 1.0
    spatial_weight: float = 1.0
    image_weight: float = 1.0

    def __post_init__(self):
        if self.image_positive_weight <= 0:
            raise ValueError("image_positive_weight must be positive")
        for name in ("cnn_weight", "temporal_weight", "spatial_weight", "image_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    cnn: float
    temporal: float
    spatial: float
    image: float
    total: float


def bce_with_logits(logits: np.ndarray, targets: np.ndarray, pos_weight: float = 1.0):
    """Element-wise weighted BCE and its gradient with respect to the logits.

    loss = pos_weight * y * softplus(-z) + (1 - y) * softplus(z),
    softplus(x) = log(1 + exp(x)) computed as logaddexp(0, x).
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"logits shape {z.shape} != targets shape {y.shape}")
    if y.size and (y.min() < 0.0 or y.max() > 1.0):
        raise ValueError("targets must lie in [0, 1]")
    loss = pos_weight * y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    s = sigmoid(z)
    grad = pos_weight * y * (s - 1.0) + (1.0 - y) * s
    return loss, grad


def compute_losses(
    output: ModelOutput,
    tile_labels: np.ndarray,
    image_labels: np.ndarray,
    config: LossConfig = LossConfig(),
    with_grads: bool = False,
):
    """Mean BCE per head plus their weighted total.

    tile_labels: (N, n_tiles) in [0, 1]; shared by the three tile heads.
    image_labels: (N,) in [0, 1]; weighted by image_positive_weight.
    Returns a LossBreakdown, or (LossBreakdown, head_grads) where the
    grads are d(total)/d(logit), ready for SmokeDetector.backward.
    """
    tile_labels = np.asarray(tile_labels, dtype=np.float64)
    image_labels = np.asarray(image_labels, dtype=np.float64)
    n = image_labels.shape[0]
    if n == 0:
        raise ValueError("cannot compute a loss over an empty batch")
    if tile_labels.shape != output.cnn_tile_logits.shape:
        raise ValueError(
            f"tile_labels shape {tile_labels.shape} != logits shape "
            f"{output.cnn_tile_logits.shape}"
        )
    if image_labels.shape != output.image_logit.shape:
        raise ValueError(
            f"image_labels shape {image_labels.shape} != logits shape "
            f"{output.image_logit.shape}"
        )

    heads = {}
    grads = {}
    for name, logits, weight in (
        ("cnn", output.cnn_tile_logits, config.cnn_weight),
        ("temporal", output.temporal_tile_logits, config.temporal_weight),
        ("spatial", output.spatial_tile_logits, config.spatial_weight),
    ):
        loss, grad = bce_with_logits(logits, tile_labels)
        heads[name] = float(loss.mean())
        grads[name] = weight * grad / loss.size

    img_loss, img_grad = bce_with_logits(
        output.image_logit, image_labels, pos_weight=config.image_positive_weight
    )
    heads["image"] = float(img_loss.mean())
    grads["image"] = config.image_weight * img_grad / n

    total = (
        config.cnn_weight * heads["cnn"]
        + config.temporal_weight * heads["temporal"]
        + config.spatial_weight * heads["spatial"]
        + config.image_weight * heads["image"]
    )
    if not np.isfinite(total):
        raise ValueError(f"loss is not finite: {heads}")
    breakdown = LossBreakdown(
        cnn=heads["cnn"],
        temporal=heads["temporal"],
        spatial=heads["spatial"],
        image=heads["image"],
        total=float(total),
    )
    return (breakdown, grads) if with_grads else breakdown
