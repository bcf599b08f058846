"""Overlapping tile decomposition of prepared images.

The full-scale geometry splits a 1040x1856 frame into 45 tiles of 224x224
at stride 204 (5 rows x 9 cols, 20 px overlap); that stride is the unique
uniform one whose last tile lands flush with the image edge in both axes
(224 + 4*204 = 1040, 224 + 8*204 = 1856). Smaller geometries with the same
exact-coverage property drive the fast test paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from smokesense.imaging.types import PreparedImage, validate_mask


@dataclass(frozen=True)
class TileGeometry:
    image_h: int = 1040
    image_w: int = 1856
    tile: int = 224
    stride: int = 204

    def __post_init__(self):
        for name in ("image_h", "image_w", "tile", "stride"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tile > min(self.image_h, self.image_w):
            raise ValueError(
                f"tile {self.tile} exceeds image {self.image_h}x{self.image_w}"
            )
        for axis, size in (("height", self.image_h), ("width", self.image_w)):
            if (size - self.tile) % self.stride != 0:
                raise ValueError(
                    f"no exact tile coverage along {axis}: "
                    f"({size} - {self.tile}) not divisible by stride {self.stride}"
                )

    @property
    def rows(self) -> int:
        return (self.image_h - self.tile) // self.stride + 1

    @property
    def cols(self) -> int:
        return (self.image_w - self.tile) // self.stride + 1

    @property
    def n_tiles(self) -> int:
        return self.rows * self.cols

    @property
    def row_origins(self) -> tuple[int, ...]:
        return tuple(r * self.stride for r in range(self.rows))

    @property
    def col_origins(self) -> tuple[int, ...]:
        return tuple(c * self.stride for c in range(self.cols))

    @property
    def origins(self) -> tuple[tuple[int, int], ...]:
        """Row-major (row_px, col_px) tile origins."""
        return tuple((r, c) for r in self.row_origins for c in self.col_origins)


FULL_GEOMETRY = TileGeometry()


@dataclass(frozen=True)
class TileGrid:
    """Row-major tile stack cut from one image."""

    tiles: np.ndarray  # (n_tiles, tile, tile, 3)
    origins: tuple[tuple[int, int], ...]
    geometry: TileGeometry
    labels: np.ndarray | None = None  # (n_tiles,) bool, filled by label_tiles
    normalized: bool | None = None  # None = unknown (built from a bare array)

    def __len__(self) -> int:
        return self.tiles.shape[0]


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, PreparedImage) else np.asarray(img)


def tile_image(img, geometry: TileGeometry = FULL_GEOMETRY) -> TileGrid:
    """Cut a prepared image into the geometry's overlapping tile stack."""
    px = _pixels(img)
    if px.shape[:2] != (geometry.image_h, geometry.image_w):
        raise ValueError(
            f"image shape {px.shape[:2]} does not match geometry "
            f"{geometry.image_h}x{geometry.image_w}"
        )
    t = geometry.tile
    tiles = np.stack([px[r : r + t, c : c + t] for r, c in geometry.origins])
    normalized = img.normalized if isinstance(img, PreparedImage) else None
    return TileGrid(
        tiles=tiles, origins=geometry.origins, geometry=geometry, normalized=normalized
    )


def label_tiles(
    grid: TileGrid,
    mask: np.ndarray,
    min_overlap_px: int = 1,
) -> np.ndarray:
    """Tile label = (mask-positive pixels inside the tile) >= min_overlap_px."""
    if min_overlap_px < 1:
        raise ValueError("min_overlap_px must be >= 1")
    geom = grid.geometry
    m = validate_mask(mask, (geom.image_h, geom.image_w))
    t = geom.tile
    labels = np.array(
        [int(m[r : r + t, c : c + t].sum()) >= min_overlap_px for r, c in grid.origins],
        dtype=bool,
    )
    return labels


def reassemble(grid: TileGrid) -> np.ndarray:
    """Paste tiles back at their origins; overlaps agree by construction."""
    geom = grid.geometry
    out = np.zeros((geom.image_h, geom.image_w) + grid.tiles.shape[3:], dtype=grid.tiles.dtype)
    t = geom.tile
    for k, (r, c) in enumerate(grid.origins):
        out[r : r + t, c : c + t] = grid.tiles[k]
    return out
