"""Frame containers for the image pipeline."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MIN_OFFSET = -40
MAX_OFFSET = 39


@dataclass(frozen=True)
class RawFrame:
    """A camera frame as it comes off disk, minutes relative to ignition."""

    camera_id: str
    minute_offset: int
    pixels: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        if not MIN_OFFSET <= self.minute_offset <= MAX_OFFSET:
            raise ValueError(
                f"minute_offset must be in [{MIN_OFFSET}, {MAX_OFFSET}], got {self.minute_offset}"
            )
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must be (H, W, 3), got {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"raw pixels must be uint8, got {px.dtype}")
        object.__setattr__(self, "pixels", px)

    @property
    def label(self) -> bool:
        return self.minute_offset >= 0


@dataclass(frozen=True)
class PreparedImage:
    """A resize-cropped frame, float pixels; `normalized` marks z-scored values."""

    camera_id: str
    minute_offset: int
    pixels: np.ndarray  # (H, W, 3) float64
    normalized: bool = False

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must be (H, W, 3), got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("prepared image contains non-finite values")
        object.__setattr__(self, "pixels", px)

    @property
    def label(self) -> bool:
        return self.minute_offset >= 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]

    def with_pixels(self, pixels: np.ndarray, normalized: bool | None = None) -> "PreparedImage":
        return replace(
            self,
            pixels=pixels,
            normalized=self.normalized if normalized is None else normalized,
        )


def validate_mask(mask: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Check a ground-truth smoke mask: binary, 2-D, matching the image."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    if m.shape != tuple(shape):
        raise ValueError(f"mask shape {m.shape} does not match image shape {tuple(shape)}")
    if m.dtype != bool:
        vals = np.unique(m)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("mask values must be binary")
        m = m.astype(bool)
    return m
