import numpy as np
import pytest

from smokesense.imaging import (
    FULL_GEOMETRY,
    AugmentParams,
    PreparedImage,
    RawFrame,
    TileGeometry,
    apply_augment,
    augment,
    denormalize_image,
    label_tiles,
    normalize_image,
    reassemble,
    resize_bilinear,
    resize_crop,
    resize_nearest,
    sample_augment,
    tile_image,
)
from smokesense.imaging.ops import DEFAULT_IMAGE_MEAN, DEFAULT_IMAGE_SD

TOY_GEOMETRY = TileGeometry(image_h=60, image_w=88, tile=32, stride=28)


def prepared(pixels, normalized=False):
    return PreparedImage(camera_id="cam", minute_offset=0, pixels=pixels, normalized=normalized)


# ---------------------------------------------------------------------------
# resize_bilinear / resize_nearest
# ---------------------------------------------------------------------------


def naive_bilinear(src, out_h, out_w):
    """Scalar reference: half-pixel centers, edge clamp, no vectorization."""
    src = np.asarray(src, dtype=float)
    h, w, c = src.shape
    out = np.zeros((out_h, out_w, c))
    for oy in range(out_h):
        for ox in range(out_w):
            sy = (oy + 0.5) * h / out_h - 0.5
            sx = (ox + 0.5) * w / out_w - 0.5
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            fy, fx = sy - y0, sx - x0
            for ch in range(c):
                def at(y, x):
                    return src[min(max(y, 0), h - 1), min(max(x, 0), w - 1), ch]

                out[oy, ox, ch] = (
                    at(y0, x0) * (1 - fy) * (1 - fx)
                    + at(y0, x1 := x0 + 1) * (1 - fy) * fx
                    + at(y0 + 1, x0) * fy * (1 - fx)
                    + at(y0 + 1, x1) * fy * fx
                )
    return out


def test_resize_matches_scalar_reference():
    rng = np.random.default_rng(0)
    for _ in range(8):
        h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
        oh, ow = int(rng.integers(1, 16)), int(rng.integers(1, 16))
        src = rng.uniform(0, 255, size=(h, w, 3))
        got = resize_bilinear(src, oh, ow)
        assert got.shape == (oh, ow, 3)
        assert np.allclose(got, naive_bilinear(src, oh, ow), atol=1e-10)


def test_resize_identity_and_constant():
    rng = np.random.default_rng(1)
    src = rng.uniform(0, 255, size=(7, 9, 3))
    assert np.array_equal(resize_bilinear(src, 7, 9), src)
    const = np.full((10, 14, 3), 42.0)
    assert np.allclose(resize_bilinear(const, 6, 5), 42.0, atol=1e-12)


def test_resize_preserves_linear_ramps_in_interior():
    # bilinear interpolation reproduces a plane exactly where nothing clamps
    h, w = 20, 30
    yy, xx = np.mgrid[0:h, 0:w]
    plane = (2.0 * xx + 3.0 * yy + 5.0)[:, :, None] * np.ones(3)
    oh, ow = 13, 21
    out = resize_bilinear(plane, oh, ow)
    ys = (np.arange(oh) + 0.5) * h / oh - 0.5
    xs = (np.arange(ow) + 0.5) * w / ow - 0.5
    iy = (ys >= 0) & (ys <= h - 1)
    ix = (xs >= 0) & (xs <= w - 1)
    expected = 2.0 * xs[None, :] + 3.0 * ys[:, None] + 5.0
    assert np.allclose(out[np.ix_(iy, ix, [0, 1, 2])], expected[np.ix_(iy, ix)][:, :, None], atol=1e-9)


def test_resize_nearest_stays_binary():
    rng = np.random.default_rng(2)
    mask = rng.random((40, 60)) < 0.2
    out = resize_nearest(mask, 30, 45)
    assert out.dtype == bool
    assert out.shape == (30, 45)
    # a mask of one solid rectangle shrinks to a solid rectangle
    solid = np.zeros((40, 60), dtype=bool)
    solid[10:30, 20:50] = True
    small = resize_nearest(solid, 20, 30)
    ys, xs = np.where(small)
    assert small[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1].all()


# ---------------------------------------------------------------------------
# resize_crop
# ---------------------------------------------------------------------------


def test_resize_crop_identity_passthrough():
    rng = np.random.default_rng(3)
    px = rng.integers(0, 256, size=(1040, 1856, 3), dtype=np.uint8)
    frame = RawFrame(camera_id="c", minute_offset=-5, pixels=px)
    out = resize_crop(frame)
    assert out.shape == (1040, 1856)
    assert np.array_equal(out.pixels, px.astype(float))
    assert out.camera_id == "c" and out.minute_offset == -5 and not out.normalized


def test_resize_crop_scales_then_bottom_crops():
    # 1536x2048 -> scale 1856/2048 -> 1392x1856 -> keep bottom 1040 rows
    rng = np.random.default_rng(4)
    px = rng.integers(0, 256, size=(1536, 2048, 3), dtype=np.uint8)
    frame = RawFrame(camera_id="c", minute_offset=0, pixels=px)
    out = resize_crop(frame)
    assert out.shape == (1040, 1856)
    assert round(1536 * 1856 / 2048) == 1392
    full = resize_bilinear(px.astype(float), 1392, 1856)
    assert np.allclose(out.pixels, np.clip(full[1392 - 1040 :], 0, 255), atol=1e-9)


def test_resize_crop_output_dims_fixed():
    rng = np.random.default_rng(5)
    for h, w in [(1100, 1900), (1300, 1856), (2000, 3000)]:
        px = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        out = resize_crop(RawFrame(camera_id="c", minute_offset=0, pixels=px))
        assert out.shape == (1040, 1856)


def test_resize_crop_rejects_short_images():
    px = np.zeros((100, 300, 3), dtype=np.uint8)
    with pytest.raises(ValueError, match="too small"):
        resize_crop(RawFrame(camera_id="c", minute_offset=0, pixels=px))


def test_resize_crop_desk_geometry():
    rng = np.random.default_rng(6)
    px = rng.integers(0, 256, size=(70, 100, 3), dtype=np.uint8)
    out = resize_crop(RawFrame(camera_id="c", minute_offset=0, pixels=px), target_h=60, target_w=88)
    assert out.shape == (60, 88)


# ---------------------------------------------------------------------------
# tiling
# ---------------------------------------------------------------------------


def test_full_geometry_counts_and_origins():
    g = FULL_GEOMETRY
    assert (g.rows, g.cols, g.n_tiles) == (5, 9, 45)
    assert g.row_origins == tuple(range(0, 817, 204)) == (0, 204, 408, 612, 816)
    assert g.col_origins == tuple(range(0, 1633, 204))
    assert g.col_origins[-1] == 1632
    # last tile flush with both edges
    assert g.row_origins[-1] + g.tile == 1040
    assert g.col_origins[-1] + g.tile == 1856
    # row-major origin list
    assert g.origins[0] == (0, 0)
    assert g.origins[1] == (0, 204)
    assert g.origins[9] == (204, 0)
    assert g.origins[44] == (816, 1632)


def test_tile_image_full_scale():
    rng = np.random.default_rng(7)
    px = rng.uniform(0, 255, size=(1040, 1856, 3))
    grid = tile_image(px)
    assert len(grid) == 45
    assert grid.tiles.shape == (45, 224, 224, 3)
    assert np.array_equal(grid.tiles[0], px[0:224, 0:224])
    assert np.array_equal(grid.tiles[44], px[816:1040, 1632:1856])
    # every pixel covered: reassembly reproduces the source exactly
    assert np.array_equal(reassemble(grid), px)


def test_tile_image_toy_geometry():
    rng = np.random.default_rng(8)
    px = rng.uniform(0, 255, size=(60, 88, 3))
    grid = tile_image(px, TOY_GEOMETRY)
    assert len(grid) == 6
    assert TOY_GEOMETRY.rows == 2 and TOY_GEOMETRY.cols == 3
    assert grid.origins == ((0, 0), (0, 28), (0, 56), (28, 0), (28, 28), (28, 56))
    assert np.array_equal(reassemble(grid), px)


def test_tile_image_rejects_wrong_dims():
    with pytest.raises(ValueError, match="does not match geometry"):
        tile_image(np.zeros((1040, 1855, 3)))


def test_invalid_geometry_rejected():
    with pytest.raises(ValueError, match="exact tile coverage"):
        TileGeometry(image_h=1040, image_w=1856, tile=224, stride=200)
    with pytest.raises(ValueError, match="exceeds image"):
        TileGeometry(image_h=30, image_w=88, tile=32, stride=28)


def test_label_tiles_empty_and_single_pixel():
    px = np.zeros((1040, 1856, 3))
    grid = tile_image(px)
    assert not label_tiles(grid, np.zeros((1040, 1856), dtype=bool)).any()

    mask = np.zeros((1040, 1856), dtype=bool)
    mask[0, 0] = True
    labels = label_tiles(grid, mask)
    assert labels[0]
    assert labels.sum() == 1


def test_label_tiles_overlap_pixel():
    # (210, 210) falls inside four tiles; enumerate them from the origins
    px = np.zeros((1040, 1856, 3))
    grid = tile_image(px)
    mask = np.zeros((1040, 1856), dtype=bool)
    mask[210, 210] = True
    labels = label_tiles(grid, mask)
    expected = {
        k
        for k, (r, c) in enumerate(grid.origins)
        if r <= 210 < r + 224 and c <= 210 < c + 224
    }
    assert expected == {0, 1, 9, 10}  # tiles (0,0), (0,1), (1,0), (1,1)
    assert set(np.where(labels)[0]) == expected


def test_label_tiles_threshold_and_monotonicity():
    px = np.zeros((60, 88, 3))
    grid = tile_image(px, TOY_GEOMETRY)
    mask = np.zeros((60, 88), dtype=bool)
    mask[2, 2] = True
    mask[3, 3] = True
    assert label_tiles(grid, mask, min_overlap_px=3).sum() == 0
    assert label_tiles(grid, mask, min_overlap_px=2)[0]

    rng = np.random.default_rng(9)
    base = rng.random((60, 88)) < 0.01
    before = label_tiles(grid, base)
    grown = base.copy()
    grown[rng.random((60, 88)) < 0.05] = True
    after = label_tiles(grid, grown)
    assert np.all(after[before])  # true labels never flip back


def test_label_tiles_rejects_mismatched_mask():
    grid = tile_image(np.zeros((60, 88, 3)), TOY_GEOMETRY)
    with pytest.raises(ValueError, match="does not match"):
        label_tiles(grid, np.zeros((60, 87), dtype=bool))


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------


def test_augment_disabled_is_identity():
    rng = np.random.default_rng(10)
    img = prepared(rng.uniform(0, 255, size=(60, 88, 3)))
    out = augment(img, 123, enabled=False)
    assert out is img


def test_augment_deterministic():
    rng = np.random.default_rng(11)
    img = prepared(rng.uniform(0, 255, size=(60, 88, 3)))
    a = augment(img, 42)
    b = augment(img, 42)
    assert np.array_equal(a.pixels, b.pixels)
    c = augment(img, 43)
    assert not np.array_equal(a.pixels, c.pixels)


def test_augment_scale_bounds_over_seeds():
    scales = [sample_augment(seed).scale for seed in range(1000)]
    assert all(0.9 <= s <= 1.0 for s in scales)
    assert min(scales) < 0.92 and max(scales) > 0.98  # actually spans the range


def test_augment_flip_rate():
    flips = sum(sample_augment(seed).hflip for seed in range(2000))
    assert 0.45 < flips / 2000 < 0.55


def test_augment_outputs_stay_in_pixel_range():
    rng = np.random.default_rng(12)
    img = rng.uniform(0, 255, size=(60, 88, 3))
    for seed in range(20):
        out = apply_augment(img, sample_augment(seed))
        assert out.min() >= 0.0 and out.max() <= 255.0


def test_augment_keeps_frame_and_mask_aligned():
    # bright square on dark ground; the mask marks the same square
    img = np.zeros((60, 88, 3))
    mask = np.zeros((60, 88), dtype=bool)
    img[20:30, 40:52] = 255.0
    mask[20:30, 40:52] = True
    params = AugmentParams(hflip=True, scale=0.9, brightness=0.0, contrast=1.0)
    out_img = apply_augment(img, params)
    out_mask = apply_augment(mask, params, is_mask=True)
    assert out_mask.dtype == bool
    bright = out_img[:, :, 0] > 127.5
    # nearest vs bilinear disagree only on a 1-px rim of the square
    assert (bright ^ out_mask).sum() <= (2 * (bright.sum() + out_mask.sum())) ** 0.5 * 4
    assert (bright & out_mask).sum() > 0.8 * max(bright.sum(), out_mask.sum())


def test_augment_mask_skips_photometric():
    mask = np.zeros((60, 88), dtype=bool)
    mask[5:10, 5:10] = True
    params = AugmentParams(hflip=False, scale=1.0, brightness=7.0, contrast=1.1)
    out = apply_augment(mask, params, is_mask=True)
    assert np.array_equal(out, mask)


def test_augment_rejects_normalized_input():
    img = prepared(np.zeros((60, 88, 3)), normalized=True)
    with pytest.raises(ValueError, match="before normalization"):
        augment(img, 1)


# ---------------------------------------------------------------------------
# normalize_image
# ---------------------------------------------------------------------------


def test_normalize_channel_mean_maps_to_zero():
    px = np.zeros((4, 5, 3))
    for ch, m in enumerate(DEFAULT_IMAGE_MEAN):
        px[:, :, ch] = 255.0 * m
    out = normalize_image(prepared(px))
    assert out.normalized
    assert np.allclose(out.pixels, 0.0, atol=1e-12)


def test_normalize_black_image_closed_form():
    out = normalize_image(prepared(np.zeros((4, 5, 3))))
    for ch in range(3):
        expected = -DEFAULT_IMAGE_MEAN[ch] / DEFAULT_IMAGE_SD[ch]
        assert np.allclose(out.pixels[:, :, ch], expected, atol=1e-12)


def test_normalize_roundtrip():
    rng = np.random.default_rng(13)
    img = prepared(rng.uniform(0, 255, size=(6, 7, 3)))
    back = denormalize_image(normalize_image(img))
    assert np.allclose(back.pixels, img.pixels, atol=1e-6)
    assert not back.normalized


def test_normalize_rejects_out_of_range():
    with pytest.raises(ValueError, match="outside"):
        normalize_image(prepared(np.full((2, 2, 3), 256.0)))
    with pytest.raises(ValueError, match="outside"):
        normalize_image(prepared(np.full((2, 2, 3), -1.0)))


def test_normalize_rejects_double_normalization():
    img = normalize_image(prepared(np.full((2, 2, 3), 100.0)))
    with pytest.raises(ValueError, match="already normalized"):
        normalize_image(img)


# ---------------------------------------------------------------------------
# frame types
# ---------------------------------------------------------------------------


def test_raw_frame_label_follows_offset():
    px = np.zeros((8, 8, 3), dtype=np.uint8)
    assert not RawFrame(camera_id="c", minute_offset=-1, pixels=px).label
    assert RawFrame(camera_id="c", minute_offset=0, pixels=px).label
    assert RawFrame(camera_id="c", minute_offset=39, pixels=px).label


def test_raw_frame_rejects_out_of_range_offsets():
    px = np.zeros((8, 8, 3), dtype=np.uint8)
    for bad in (-41, 40):
        with pytest.raises(ValueError, match="minute_offset"):
            RawFrame(camera_id="c", minute_offset=bad, pixels=px)
