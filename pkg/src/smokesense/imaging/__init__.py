"""Image preparation: resize-crop, normalization, tiling, augmentation."""

from smokesense.imaging.augment import (
    IDENTITY_PARAMS,
    AugmentParams,
    apply_augment,
    augment,
    sample_augment,
)
from smokesense.imaging.ops import (
    DEFAULT_IMAGE_MEAN,
    DEFAULT_IMAGE_SD,
    TARGET_HEIGHT,
    TARGET_WIDTH,
    denormalize_image,
    normalize_image,
    resize_bilinear,
    resize_crop,
    resize_crop_mask,
    resize_nearest,
)
from smokesense.imaging.tiling import (
    FULL_GEOMETRY,
    TileGeometry,
    TileGrid,
    label_tiles,
    reassemble,
    tile_image,
)
from smokesense.imaging.types import (
    MAX_OFFSET,
    MIN_OFFSET,
    PreparedImage,
    RawFrame,
    validate_mask,
)

__all__ = [
    "AugmentParams",
    "DEFAULT_IMAGE_MEAN",
    "DEFAULT_IMAGE_SD",
    "FULL_GEOMETRY",
    "IDENTITY_PARAMS",
    "MAX_OFFSET",
    "MIN_OFFSET",
    "PreparedImage",
    "RawFrame",
    "TARGET_HEIGHT",
    "TARGET_WIDTH",
    "TileGeometry",
    "TileGrid",
    "apply_augment",
    "augment",
    "denormalize_image",
    "label_tiles",
    "normalize_image",
    "reassemble",
    "resize_bilinear",
    "resize_crop",
    "resize_crop_mask",
    "resize_nearest",
    "sample_augment",
    "tile_image",
    "validate_mask",
]
