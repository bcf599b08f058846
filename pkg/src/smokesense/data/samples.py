"""Aligned (previous frame, current frame, weather, labels) samples.

Every frame except the first pairs with its predecessor, so an 80-frame
sequence yields 79 samples. One augmentation draw is shared by all frames
of a sequence (and their masks), keeping the two frames of each sample
geometrically consistent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from smokesense.data.sequences import FireSequence, offset_tag
from smokesense.imaging.augment import AugmentParams, apply_augment
from smokesense.imaging.ops import normalize_image, resize_crop, resize_crop_mask
from smokesense.imaging.tiling import FULL_GEOMETRY, TileGeometry, TileGrid, label_tiles, tile_image
from smokesense.weather.pipeline import WeatherStats, build_weather_vector
from smokesense.weather.types import CameraPose, WeatherSeries, WeatherStation, WeatherVector


@dataclass(frozen=True)
class AlignedSample:
    """One training/evaluation sample: two consecutive tiled frames, the
    weather at the current frame's instant, and mask-derived labels."""

    fire_id: str
    offset: int  # minute offset of the current frame
    previous: TileGrid
    current: TileGrid
    weather: WeatherVector
    image_label: bool
    tile_labels: np.ndarray  # (n_tiles,) bool

    def __post_init__(self):
        labels = np.asarray(self.tile_labels, dtype=bool)
        n = len(self.current)
        if labels.shape != (n,):
            raise ValueError(
                f"fire {self.fire_id} offset {offset_tag(self.offset)}: "
                f"{labels.shape} tile labels for {n} tiles"
            )
        object.__setattr__(self, "tile_labels", labels)
        if len(self.previous) != n:
            raise ValueError("previous/current tile counts differ")


def align_weather_to_frames(
    seq: FireSequence,
    registry: Sequence[WeatherStation],
    store: Mapping[str, WeatherSeries],
    stats: WeatherStats | None = None,
    k: int = 3,
) -> list[WeatherVector]:
    """One fused weather vector per frame, at the frame's own timestamp."""
    vectors = []
    for frame in seq.frames:
        t = seq.frame_time(frame.minute_offset)
        try:
            vectors.append(build_weather_vector(seq.camera, registry, store, t, stats=stats, k=k))
        except (ValueError, KeyError) as e:
            raise ValueError(
                f"fire {seq.fire_id}, frame offset {offset_tag(frame.minute_offset)}: "
                f"no weather coverage ({e})"
            ) from e
    return vectors


def pair_consecutive_frames(
    seq: FireSequence,
    weather_vectors: Sequence[WeatherVector],
    geometry: TileGeometry = FULL_GEOMETRY,
    masks: Mapping[int, np.ndarray] | None = None,
    augment_params: AugmentParams | None = None,
    min_overlap_px: int = 1,
) -> list[AlignedSample]:
    """Build the sequence's aligned samples (frame count - 1 of them).

    Frames are resize-cropped to the tile geometry, optionally augmented
    (one shared draw for the whole sequence, masks transformed alongside),
    normalized, and tiled. Tile labels come from the masks; the image label
    is their OR. Without masks, tile labels are all-false and the image
    label falls back to the frame's offset sign.
    """
    if len(weather_vectors) != len(seq.frames):
        raise ValueError(
            f"fire {seq.fire_id}: {len(weather_vectors)} weather vectors "
            f"for {len(seq.frames)} frames"
        )

    grids: list[TileGrid] = []
    tile_label_rows: list[np.ndarray | None] = []
    for frame in seq.frames:
        img = resize_crop(frame, geometry.image_h, geometry.image_w)
        mask = masks.get(frame.minute_offset) if masks is not None else None
        if mask is not None:
            mask = resize_crop_mask(mask, geometry.image_h, geometry.image_w)
        if augment_params is not None:
            img = img.with_pixels(apply_augment(img.pixels, augment_params))
            if mask is not None:
                mask = apply_augment(mask, augment_params, is_mask=True)
        grid = tile_image(normalize_image(img), geometry)
        grids.append(grid)
        tile_label_rows.append(None if mask is None else label_tiles(grid, mask, min_overlap_px))

    samples = []
    for i in range(1, len(seq.frames)):
        frame = seq.frames[i]
        weather = weather_vectors[i]
        expected_t = seq.frame_time(frame.minute_offset)
        if weather.timestamp != expected_t:
            raise ValueError(
                f"fire {seq.fire_id}, offset {offset_tag(frame.minute_offset)}: "
                f"weather timestamp {weather.timestamp.isoformat()} is not the "
                f"frame time {expected_t.isoformat()}"
            )
        labels = tile_label_rows[i]
        if labels is None:
            labels = np.zeros(geometry.n_tiles, dtype=bool)
            image_label = frame.label
        else:
            image_label = bool(labels.any())
        samples.append(
            AlignedSample(
                fire_id=seq.fire_id,
                offset=frame.minute_offset,
                previous=grids[i - 1],
                current=grids[i],
                weather=weather,
                image_label=image_label,
                tile_labels=labels,
            )
        )
    return samples


def stack_samples(samples: Sequence[AlignedSample]):
    """Batch arrays for the model: (prev, curr, weather, tile_labels, image_labels)."""
    if not samples:
        raise ValueError("cannot stack an empty sample list")
    prev = np.stack([s.previous.tiles for s in samples])
    curr = np.stack([s.current.tiles for s in samples])
    weather = np.stack([s.weather.values for s in samples])
    tile_labels = np.stack([s.tile_labels for s in samples]).astype(np.float64)
    image_labels = np.array([s.image_label for s in samples], dtype=np.float64)
    return prev, curr, weather, tile_labels, image_labels
