"""Train-time image augmentation.

One :class:`AugmentParams` draw is applied to every frame of a sequence and
to its ground-truth mask, so geometry stays aligned across the inputs the
model sees together. Masks skip the photometric part and are resampled
nearest-neighbour to stay binary. Validation and test paths never augment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from smokesense.imaging.ops import resize_bilinear, resize_nearest
from smokesense.imaging.types import PreparedImage

SCALE_MIN = 0.9
SCALE_MAX = 1.0
BRIGHTNESS_MAX = 8.0  # additive jitter, pixel units
CONTRAST_JITTER = 0.1


@dataclass(frozen=True)
class AugmentParams:
    hflip: bool
    scale: float
    brightness: float
    contrast: float

    def __post_init__(self):
        if not SCALE_MIN <= self.scale <= SCALE_MAX:
            raise ValueError(f"scale must be in [{SCALE_MIN}, {SCALE_MAX}], got {self.scale}")


IDENTITY_PARAMS = AugmentParams(hflip=False, scale=1.0, brightness=0.0, contrast=1.0)


def sample_augment(seed_or_rng) -> AugmentParams:
    rng = (
        seed_or_rng
        if isinstance(seed_or_rng, np.random.Generator)
        else np.random.default_rng(seed_or_rng)
    )
    return AugmentParams(
        hflip=bool(rng.random() < 0.5),
        scale=float(rng.uniform(SCALE_MIN, SCALE_MAX)),
        brightness=float(rng.uniform(-BRIGHTNESS_MAX, BRIGHTNESS_MAX)),
        contrast=float(rng.uniform(1.0 - CONTRAST_JITTER, 1.0 + CONTRAST_JITTER)),
    )


def apply_augment(pixels: np.ndarray, params: AugmentParams, is_mask: bool = False) -> np.ndarray:
    """Apply one augmentation draw to an (H, W, C) frame or (H, W) mask."""
    out = np.asarray(pixels)
    h, w = out.shape[:2]
    if params.hflip:
        out = out[:, ::-1]
    if params.scale != 1.0:
        new_h = max(1, int(round(h * params.scale)))
        new_w = max(1, int(round(w * params.scale)))
        resample = resize_nearest if is_mask else resize_bilinear
        small = resample(out, new_h, new_w)
        padded = np.zeros(out.shape, dtype=small.dtype)
        padded[:new_h, :new_w] = small
        out = padded
    if is_mask:
        return out.astype(bool) if out.dtype == bool else np.ascontiguousarray(out)
    out = np.asarray(out, dtype=np.float64)
    if params.contrast != 1.0 or params.brightness != 0.0:
        out = (out - 127.5) * params.contrast + 127.5 + params.brightness
        out = np.clip(out, 0.0, 255.0)
    return np.ascontiguousarray(out)


def augment(img: PreparedImage, seed_or_rng, enabled: bool = True) -> PreparedImage:
    """Seeded augmentation of a single prepared image; identity when disabled."""
    if not enabled:
        return img
    if img.normalized:
        raise ValueError("augment operates on [0, 255] pixels, before normalization")
    params = sample_augment(seed_or_rng)
    return img.with_pixels(apply_augment(img.pixels, params))
