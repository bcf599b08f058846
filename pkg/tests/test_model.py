"""Full-network tests: config invariants, forward contracts, fusion,
transfer initialization, checkpointing, and end-to-end gradient checks."""

from dataclasses import replace

import numpy as np
import pytest

from gradcheck import fd_wrt_array, fd_wrt_param, grads_close, sample_indices
from smokesense.imaging.tiling import TileGeometry, TileGrid, tile_image
from smokesense.imaging.types import PreparedImage
from smokesense.model import (
    Checkpoint,
    FusionBlock,
    ModelConfig,
    ModelOutput,
    SmokeDetector,
    STAGE_MULTIMODAL,
    STAGE_VANILLA,
    build_model,
    checkpoint_from_model,
    init_from_vanilla,
    load_checkpoint,
    save_checkpoint,
)

MICRO = ModelConfig(
    tile_size=8,
    grid_rows=1,
    grid_cols=2,
    backbone_channels=(4, 8),
    backbone_embed_dim=8,
    temporal_hidden_dim=8,
    spatial_token_dim=8,
    n_heads=2,
    n_transformer_layers=1,
)
MICRO_FUSED = replace(MICRO, fusion_enabled=True)
MICRO_TEST = replace(MICRO_FUSED, fusion_test_mode=True)


def make_inputs(rng, cfg, n):
    shape = (n, cfg.n_tiles, cfg.tile_size, cfg.tile_size, 3)
    prev = rng.normal(size=shape) * 0.5
    curr = rng.normal(size=shape) * 0.5
    weather = rng.normal(size=(n, cfg.weather_dim))
    return prev, curr, weather


def flat_logits(out: ModelOutput) -> np.ndarray:
    return np.concatenate([
        out.cnn_tile_logits.ravel(),
        out.temporal_tile_logits.ravel(),
        out.spatial_tile_logits.ravel(),
        out.image_logit.ravel(),
    ])


# --------------------------------------------------------------------- config


def test_default_config_dimensions():
    cfg = ModelConfig()
    assert cfg.n_tiles == 45
    assert cfg.fused_width == 512 + 8 * 10 == 592


def test_fusion_block_maps_fused_width_to_embed_dim():
    block = FusionBlock(512, 8, 10, np.random.default_rng(0))
    assert block.input_width == 592
    assert block.linear.W.shape == (592, 512)
    assert block.linear.b.shape == (512,)


@pytest.mark.parametrize(
    "kwargs,needle",
    [
        (dict(temporal_hidden_dim=256), "temporal_hidden_dim"),
        (dict(spatial_token_dim=256), "spatial_token_dim"),
        (dict(backbone_channels=(64, 256)), "backbone_channels"),
        (dict(n_heads=7), "n_heads"),
        (dict(tile_size=0), "tile_size"),
        (dict(weather_dim=-1), "weather_dim"),
        (dict(replication_factor=0), "replication_factor"),
        (dict(n_transformer_layers=-1), "n_transformer_layers"),
        (dict(fusion_test_mode=True), "fusion_enabled"),
        (dict(backbone_channels=()), "backbone_channels"),
    ],
)
def test_config_rejects_inconsistent_dimensions(kwargs, needle):
    with pytest.raises(ValueError, match=needle):
        ModelConfig(**kwargs)


def test_config_accepts_zero_transformer_layers():
    cfg = replace(MICRO, n_transformer_layers=0)
    assert cfg.n_transformer_layers == 0


# -------------------------------------------------------------------- forward


def test_forward_output_shapes_and_probabilities():
    model = SmokeDetector(MICRO_FUSED, seed_or_rng=0)
    rng = np.random.default_rng(1)
    prev, curr, weather = make_inputs(rng, MICRO_FUSED, 3)
    out, _ = model.forward(prev, curr, weather)
    assert out.cnn_tile_logits.shape == (3, 2)
    assert out.temporal_tile_logits.shape == (3, 2)
    assert out.spatial_tile_logits.shape == (3, 2)
    assert out.image_logit.shape == (3,)
    assert np.all((out.image_probability > 0) & (out.image_probability < 1))
    for probs in out.tile_probabilities.values():
        assert np.all((probs > 0) & (probs < 1))


def test_forward_validates_inputs():
    model = SmokeDetector(MICRO_FUSED, seed_or_rng=0)
    vanilla = SmokeDetector(MICRO, seed_or_rng=0)
    rng = np.random.default_rng(2)
    prev, curr, weather = make_inputs(rng, MICRO_FUSED, 2)
    with pytest.raises(ValueError, match="weather"):
        model.forward(prev, curr)  # fusion on, weather missing
    with pytest.raises(ValueError, match="fusion is disabled"):
        vanilla.forward(prev, curr, weather)
    with pytest.raises(ValueError, match="shape"):
        model.forward(prev, curr, weather[:1])
    with pytest.raises(ValueError, match="differ"):
        model.forward(prev[:1], curr, weather)
    with pytest.raises(ValueError, match="tile"):
        model.forward(prev[:, :1], curr[:, :1], weather)


def test_forward_batch_independence():
    model = SmokeDetector(MICRO_FUSED, seed_or_rng=4)
    rng = np.random.default_rng(5)
    prev, curr, weather = make_inputs(rng, MICRO_FUSED, 4)
    batch, _ = model.forward(prev, curr, weather)
    for i in range(4):
        single, _ = model.forward(prev[i : i + 1], curr[i : i + 1], weather[i : i + 1])
        assert np.allclose(single.image_logit[0], batch.image_logit[i], atol=1e-12)
        assert np.allclose(
            single.spatial_tile_logits[0], batch.spatial_tile_logits[i], atol=1e-12
        )


def test_forward_uses_both_frames():
    model = SmokeDetector(MICRO, seed_or_rng=6)
    rng = np.random.default_rng(7)
    prev, curr, _ = make_inputs(rng, MICRO, 1)
    base, _ = model.forward(prev, curr)
    bumped, _ = model.forward(prev + 0.3, curr)
    assert not np.allclose(base.temporal_tile_logits, bumped.temporal_tile_logits)
    # the cnn tile head reads only the current frame
    assert np.array_equal(base.cnn_tile_logits, bumped.cnn_tile_logits)


def test_model_output_rejects_nonfinite():
    ok = np.zeros((1, 2))
    with pytest.raises(ValueError, match="image_logit"):
        ModelOutput(ok, ok, ok, np.array([np.nan]))


# --------------------------------------------------------------- encode_tiles


def test_encode_tiles_accepts_arrays_and_normalized_grids():
    model = SmokeDetector(MICRO, seed_or_rng=8)
    rng = np.random.default_rng(9)
    tiles = rng.normal(size=(5, 8, 8, 3))
    emb = model.encode_tiles(tiles)
    assert emb.shape == (5, 8)

    geom = TileGeometry(image_h=8, image_w=15, tile=8, stride=7)
    img = PreparedImage(
        camera_id="cam", minute_offset=0, pixels=rng.random((8, 15, 3)), normalized=True
    )
    grid = tile_image(img, geom)
    assert grid.normalized is True
    assert model.encode_tiles(grid).shape == (2, 8)

    raw = replace(grid, normalized=False)
    with pytest.raises(ValueError, match="normalized"):
        model.encode_tiles(raw)


def test_encode_tiles_is_per_tile():
    # permuting the tile batch permutes the embeddings and nothing else
    model = SmokeDetector(MICRO, seed_or_rng=10)
    rng = np.random.default_rng(11)
    tiles = rng.normal(size=(6, 8, 8, 3))
    perm = rng.permutation(6)
    emb = model.encode_tiles(tiles)
    emb_perm = model.encode_tiles(tiles[perm])
    assert np.allclose(emb_perm, emb[perm], atol=1e-12)


# ------------------------------------------------------------- spatial encode


def test_spatial_encode_zero_layers_is_positional_passthrough():
    cfg = replace(MICRO, n_transformer_layers=0)
    model = SmokeDetector(cfg, seed_or_rng=12)
    rng = np.random.default_rng(13)
    h = rng.normal(size=(3, cfg.n_tiles, cfg.spatial_token_dim))
    tile_tokens, cls_tok = model.spatial_encode(h)
    assert np.array_equal(tile_tokens, h + model.pos.value[1:])
    assert np.allclose(cls_tok, model.cls.value + model.pos.value[0], atol=1e-15)


def test_perturbing_one_tile_moves_the_cls_token():
    model = SmokeDetector(MICRO, seed_or_rng=14)
    rng = np.random.default_rng(15)
    h = rng.normal(size=(1, MICRO.n_tiles, MICRO.spatial_token_dim))
    _, cls_base = model.spatial_encode(h)
    h2 = h.copy()
    h2[0, 1, 3] += 1.0  # reshape one token (a uniform shift would cancel in LayerNorm)
    _, cls_bumped = model.spatial_encode(h2)
    assert not np.allclose(cls_base, cls_bumped)


# ----------------------------------------------------------- fusion semantics


def test_fusion_test_mode_is_identity_on_embeddings():
    block = FusionBlock(8, 8, 10, np.random.default_rng(16), test_mode=True)
    rng = np.random.default_rng(17)
    emb = rng.normal(size=(2, 3, 8))
    weather = rng.normal(size=(2, 8))
    out, _ = block.forward(emb, weather)
    assert np.array_equal(out, emb)


def test_fusion_weather_changes_output_when_trained():
    block = FusionBlock(8, 8, 10, np.random.default_rng(18))
    rng = np.random.default_rng(19)
    emb = rng.normal(size=(2, 3, 8))
    w1 = rng.normal(size=(2, 8))
    w2 = w1 + 0.5
    out1, _ = block.forward(emb, w1)
    out2, _ = block.forward(emb, w2)
    assert not np.allclose(out1, out2)


def test_fusion_weather_gradient_matches_fd():
    block = FusionBlock(6, 8, 10, np.random.default_rng(20))
    rng = np.random.default_rng(21)
    emb = rng.normal(size=(2, 4, 6))
    weather = rng.normal(size=(2, 8))
    r = rng.normal(size=(2, 4, 6))

    def loss():
        out, _ = block.forward(emb, weather)
        return float(np.sum(out * r))

    out, cache = block.forward(emb, weather)
    g_emb, g_weather = block.backward(r, cache)
    assert g_emb.shape == emb.shape and g_weather.shape == weather.shape
    assert np.any(np.abs(g_weather) > 1e-6)
    for idx in sample_indices(rng, weather.shape, k=6):
        fd = fd_wrt_array(loss, weather, idx)
        assert grads_close(g_weather[idx], fd), f"weather{idx}"
    for idx in sample_indices(rng, emb.shape, k=6):
        fd = fd_wrt_array(loss, emb, idx)
        assert grads_close(g_emb[idx], fd), f"emb{idx}"


# ------------------------------------------------------------- full gradients


def test_full_model_gradient_check():
    """Analytic gradients of a scalar readout match central differences for
    at least 200 sampled parameters across every submodule, including the
    weather rows of both fusion blocks, at relative error below 1e-4."""
    model = SmokeDetector(MICRO_FUSED, seed_or_rng=22)
    rng = np.random.default_rng(23)
    prev, curr, weather = make_inputs(rng, MICRO_FUSED, 2)
    r_cnn = rng.normal(size=(2, 2))
    r_tmp = rng.normal(size=(2, 2))
    r_spa = rng.normal(size=(2, 2))
    r_img = rng.normal(size=(2,))

    def loss():
        out, _ = model.forward(prev, curr, weather)
        return float(
            np.sum(out.cnn_tile_logits * r_cnn)
            + np.sum(out.temporal_tile_logits * r_tmp)
            + np.sum(out.spatial_tile_logits * r_spa)
            + np.sum(out.image_logit * r_img)
        )

    _, cache = model.forward(prev, curr, weather)
    model.zero_grad()
    grads_in = model.backward(
        {"cnn": r_cnn, "temporal": r_tmp, "spatial": r_spa, "image": r_img}, cache
    )

    checked = 0
    for name, p in model.named_parameters():
        for idx in sample_indices(rng, p.shape, k=5):
            fd = fd_wrt_param(loss, p, idx)
            assert grads_close(p.grad[idx], fd, tol=1e-4), (
                f"{name}{idx}: analytic {p.grad[idx]} vs fd {fd}"
            )
            checked += 1
    assert checked >= 200

    # the new weather rows of both fusion blocks specifically
    for block_name in ("fusion_cnn", "fusion_lstm"):
        block = getattr(model, block_name)
        w = block.linear.W
        assert np.any(np.abs(w.grad[block.embed_dim :, :]) > 0)
        for _ in range(4):
            idx = (
                int(rng.integers(block.embed_dim, block.input_width)),
                int(rng.integers(w.shape[1])),
            )
            fd = fd_wrt_param(loss, w, idx)
            assert grads_close(w.grad[idx], fd, tol=1e-4), f"{block_name}.W{idx}"

    # gradients flow back to the weather inputs and match finite differences
    gw = grads_in["weather"]
    assert gw is not None and gw.shape == weather.shape
    assert np.all(np.any(np.abs(gw) > 1e-9, axis=1))
    for idx in sample_indices(rng, weather.shape, k=6):
        fd = fd_wrt_array(loss, weather, idx)
        assert grads_close(gw[idx], fd, tol=1e-4), f"weather{idx}"


def test_vanilla_model_has_no_weather_gradient():
    model = SmokeDetector(MICRO, seed_or_rng=24)
    rng = np.random.default_rng(25)
    prev, curr, _ = make_inputs(rng, MICRO, 1)
    out, cache = model.forward(prev, curr)
    grads_in = model.backward(
        {
            "cnn": np.ones((1, 2)),
            "temporal": np.ones((1, 2)),
            "spatial": np.ones((1, 2)),
            "image": np.ones((1,)),
        },
        cache,
    )
    assert grads_in["weather"] is None
    names = [n for n, _ in model.named_parameters()]
    assert not any(n.startswith("fusion") for n in names)


# ----------------------------------------------------------- transfer weights


def test_transfer_initialization_preserves_predictions():
    """A weather-fused model initialized from a vanilla checkpoint in fusion
    test mode reproduces the vanilla predictions on 50 inputs to 1e-5."""
    vanilla_model = SmokeDetector(MICRO, seed_or_rng=26)
    vanilla = checkpoint_from_model(vanilla_model, STAGE_VANILLA, val_loss=0.42)
    multi = init_from_vanilla(vanilla, MICRO_TEST, seed=27)
    assert multi.stage == STAGE_MULTIMODAL
    assert multi.val_loss == 0.42
    fused = build_model(multi)

    rng = np.random.default_rng(28)
    prev, curr, weather = make_inputs(rng, MICRO_TEST, 50)
    out_v, _ = vanilla_model.forward(prev, curr)
    out_f, _ = fused.forward(prev, curr, weather)
    diff = np.abs(flat_logits(out_v) - flat_logits(out_f))
    assert diff.max() <= 1e-5


def test_transfer_copies_shared_parameters_verbatim():
    vanilla_model = SmokeDetector(MICRO, seed_or_rng=29)
    vanilla = checkpoint_from_model(vanilla_model, STAGE_VANILLA, val_loss=1.0)
    multi = init_from_vanilla(vanilla, MICRO_FUSED, seed=30)
    for name, value in vanilla.params.items():
        assert np.array_equal(multi.params[name], value), name
    for block in ("fusion_cnn", "fusion_lstm"):
        w = multi.params[f"{block}.linear.W"]
        e = MICRO_FUSED.backbone_embed_dim
        assert np.array_equal(w[:e, :], np.eye(e))
        assert np.any(w[e:, :] != 0)  # random weather rows, not test zeros
        assert np.array_equal(multi.params[f"{block}.linear.b"], 0 * multi.params[f"{block}.linear.b"])


def test_transfer_is_deterministic_in_seed():
    vanilla = checkpoint_from_model(
        SmokeDetector(MICRO, seed_or_rng=31), STAGE_VANILLA, val_loss=0.5
    )
    a = init_from_vanilla(vanilla, MICRO_FUSED, seed=7)
    b = init_from_vanilla(vanilla, MICRO_FUSED, seed=7)
    c = init_from_vanilla(vanilla, MICRO_FUSED, seed=8)
    for name in a.params:
        assert np.array_equal(a.params[name], b.params[name])
    assert any(not np.array_equal(a.params[n], c.params[n]) for n in a.params)


def test_transfer_rejects_bad_inputs():
    vanilla = checkpoint_from_model(
        SmokeDetector(MICRO, seed_or_rng=32), STAGE_VANILLA, val_loss=0.5
    )
    multi = init_from_vanilla(vanilla, MICRO_FUSED, seed=0)
    with pytest.raises(ValueError, match="vanilla"):
        init_from_vanilla(multi, MICRO_FUSED, seed=0)
    with pytest.raises(ValueError, match="fusion_enabled"):
        init_from_vanilla(vanilla, MICRO, seed=0)
    wider = replace(
        MICRO_FUSED,
        backbone_channels=(4, 16),
        backbone_embed_dim=16,
        temporal_hidden_dim=16,
        spatial_token_dim=16,
    )
    with pytest.raises(ValueError, match="backbone_channels"):
        init_from_vanilla(vanilla, wider, seed=0)
    clipped = Checkpoint(
        params={k: v for k, v in vanilla.params.items() if k != "lstm.Wx"},
        config=vanilla.config,
        stage=STAGE_VANILLA,
        val_loss=0.5,
    )
    with pytest.raises(ValueError, match="lstm.Wx"):
        init_from_vanilla(clipped, MICRO_FUSED, seed=0)


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_roundtrip_is_bit_identical(tmp_path):
    model = SmokeDetector(MICRO_FUSED, seed_or_rng=33)
    rng_state = np.random.default_rng(99).bit_generator.state
    ckpt = checkpoint_from_model(model, STAGE_MULTIMODAL, 0.123, rng_state=rng_state)
    path = tmp_path / "model.ckpt"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)

    assert loaded.version == ckpt.version
    assert loaded.stage == STAGE_MULTIMODAL
    assert loaded.val_loss == 0.123
    assert loaded.rng_state == rng_state
    assert set(loaded.params) == set(ckpt.params)
    for name in ckpt.params:
        assert np.array_equal(loaded.params[name], ckpt.params[name]), name

    rebuilt = build_model(loaded)
    rng = np.random.default_rng(34)
    prev, curr, weather = make_inputs(rng, MICRO_FUSED, 2)
    out_a, _ = model.forward(prev, curr, weather)
    out_b, _ = rebuilt.forward(prev, curr, weather)
    assert np.array_equal(flat_logits(out_a), flat_logits(out_b))


def test_checkpoint_params_are_snapshots():
    model = SmokeDetector(MICRO, seed_or_rng=35)
    ckpt = checkpoint_from_model(model, STAGE_VANILLA, 0.5)
    before = ckpt.params["cls"].copy()
    model.cls.value += 1.0
    assert np.array_equal(ckpt.params["cls"], before)


def test_load_checkpoint_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.ckpt")
    ckpt = checkpoint_from_model(SmokeDetector(MICRO, seed_or_rng=36), STAGE_VANILLA, 0.5)
    ckpt.version = 999
    path = tmp_path / "v999.ckpt"
    save_checkpoint(ckpt, path)
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_build_model_names_mismatched_parameters():
    ckpt = checkpoint_from_model(SmokeDetector(MICRO, seed_or_rng=37), STAGE_VANILLA, 0.5)
    ckpt.params["not.a.param"] = ckpt.params.pop("cls")
    with pytest.raises(ValueError, match=r"cls.*not\.a\.param|not\.a\.param.*cls"):
        build_model(ckpt)


def test_checkpoint_rejects_unknown_stage():
    with pytest.raises(ValueError, match="stage"):
        Checkpoint(params={}, config=MICRO, stage="warmup", val_loss=0.0)


def test_model_construction_is_deterministic():
    a = SmokeDetector(MICRO_FUSED, seed_or_rng=38)
    b = SmokeDetector(MICRO_FUSED, seed_or_rng=38)
    for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        assert np.array_equal(pa.value, pb.value), name
