"""Resampling, crop and normalization for camera frames.

The resamplers use half-pixel-center source coordinates with edge clamping:
output pixel i maps to source coordinate (i + 0.5) * (src / dst) - 0.5. The
same convention serves the prepare path and the augmentation path, so a
frame and its ground-truth mask stay geometrically aligned.
"""

from __future__ import annotations

import numpy as np

from smokesense.imaging.types import PreparedImage, RawFrame

TARGET_HEIGHT = 1040
TARGET_WIDTH = 1856

# per-channel constants for (x/255 - mean) / sd, recorded in run configs
DEFAULT_IMAGE_MEAN = (0.485, 0.456, 0.406)
DEFAULT_IMAGE_SD = (0.229, 0.224, 0.225)


def _source_coords(dst: int, src: int) -> np.ndarray:
    return (np.arange(dst) + 0.5) * (src / dst) - 0.5


def resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an (H, W) or (H, W, C) array to (out_h, out_w)."""
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    src = np.asarray(pixels, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    h, w = src.shape[:2]
    if (out_h, out_w) == (h, w):
        out = src.copy()
        return out[:, :, 0] if squeeze else out

    ys = _source_coords(out_h, h)
    xs = _source_coords(out_w, w)
    y0f = np.floor(ys)
    x0f = np.floor(xs)
    wy = (ys - y0f)[:, None, None]
    wx = (xs - x0f)[None, :, None]
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, h - 1)
    x0 = np.clip(x0f.astype(np.int64), 0, w - 1)
    x1 = np.clip(x0f.astype(np.int64) + 1, 0, w - 1)

    top = src[np.ix_(y0, x0)] * (1.0 - wx) + src[np.ix_(y0, x1)] * wx
    bot = src[np.ix_(y1, x0)] * (1.0 - wx) + src[np.ix_(y1, x1)] * wx
    out = top * (1.0 - wy) + bot * wy
    return out[:, :, 0] if squeeze else out


def resize_nearest(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resample; keeps binary masks binary."""
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    src = np.asarray(pixels)
    h, w = src.shape[:2]
    yi = np.clip(np.round(_source_coords(out_h, h)).astype(np.int64), 0, h - 1)
    xi = np.clip(np.round(_source_coords(out_w, w)).astype(np.int64), 0, w - 1)
    return src[yi][:, xi].copy()


def resize_crop(
    frame: RawFrame,
    target_h: int = TARGET_HEIGHT,
    target_w: int = TARGET_WIDTH,
) -> PreparedImage:
    """Scale to the target width, then keep the bottom `target_h` rows.

    The top of a fixed horizon view holds sky and clouds; anchoring the crop
    to the bottom discards them while keeping terrain.
    """
    h, w = frame.pixels.shape[:2]
    if (h, w) == (target_h, target_w):
        return PreparedImage(
            camera_id=frame.camera_id,
            minute_offset=frame.minute_offset,
            pixels=frame.pixels.astype(np.float64),
        )
    new_h = int(round(h * (target_w / w)))
    if new_h < target_h:
        raise ValueError(
            f"image {h}x{w} too small: scaled height {new_h} < target {target_h}"
        )
    resized = resize_bilinear(frame.pixels, new_h, target_w)
    cropped = resized[new_h - target_h :, :, :]
    return PreparedImage(
        camera_id=frame.camera_id,
        minute_offset=frame.minute_offset,
        pixels=np.clip(cropped, 0.0, 255.0),
    )


def resize_crop_mask(
    mask: np.ndarray,
    target_h: int = TARGET_HEIGHT,
    target_w: int = TARGET_WIDTH,
) -> np.ndarray:
    """The resize_crop geometry for a (H, W) mask: nearest-neighbour scale
    to the target width, then keep the bottom rows."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    h, w = m.shape
    if (h, w) == (target_h, target_w):
        return m.copy()
    new_h = int(round(h * (target_w / w)))
    if new_h < target_h:
        raise ValueError(
            f"mask {h}x{w} too small: scaled height {new_h} < target {target_h}"
        )
    resized = resize_nearest(m, new_h, target_w)
    return resized[new_h - target_h :, :]


def normalize_image(
    img: PreparedImage,
    mean: tuple[float, float, float] = DEFAULT_IMAGE_MEAN,
    sd: tuple[float, float, float] = DEFAULT_IMAGE_SD,
) -> PreparedImage:
    """Per-channel (x/255 - mean) / sd."""
    if img.normalized:
        raise ValueError("image is already normalized")
    px = img.pixels
    if px.min() < 0.0 or px.max() > 255.0:
        raise ValueError(
            f"pixel values outside [0, 255]: range [{px.min()}, {px.max()}]"
        )
    mu = np.asarray(mean, dtype=np.float64)
    sigma = np.asarray(sd, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("per-channel sd must be positive")
    out = (px / 255.0 - mu) / sigma
    return img.with_pixels(out, normalized=True)


def denormalize_image(
    img: PreparedImage,
    mean: tuple[float, float, float] = DEFAULT_IMAGE_MEAN,
    sd: tuple[float, float, float] = DEFAULT_IMAGE_SD,
) -> PreparedImage:
    if not img.normalized:
        raise ValueError("image is not normalized")
    mu = np.asarray(mean, dtype=np.float64)
    sigma = np.asarray(sd, dtype=np.float64)
    out = (img.pixels * sigma + mu) * 255.0
    return img.with_pixels(out, normalized=False)
