"""The smoke detector: tile CNN, weather fusion, 2-step LSTM, tile
transformer with a classification token, and four prediction heads.

Data flow for one sample (previous frame, current frame, weather):

  tiles(prev), tiles(curr) --backbone--> per-tile embeddings
    --fusion (if enabled)--> fused embeddings (per frame)
    --2-step LSTM per tile--> temporal embeddings
    --fusion (if enabled)--> fused temporal embeddings
    --transformer over [CLS] + tile tokens + positions--> contextual tokens
  heads: per-tile logits from the CNN, temporal and spatial stages,
  plus one image logit from the CLS token.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from smokesense.imaging.tiling import TileGrid
from smokesense.model.backbone import TileEncoder
from smokesense.model.fusion import FusionBlock
from smokesense.model.layers import LSTM2, Linear, ReLU, TransformerBlock, sigmoid
from smokesense.model.params import Module, Parameter

STAGE_VANILLA = "vanilla"
STAGE_MULTIMODAL = "multimodal"


@dataclass(frozen=True)
class ModelConfig:
    tile_size: int = 224
    grid_rows: int = 5
    grid_cols: int = 9
    backbone_channels: tuple[int, ...] = (64, 128, 256, 512)
    backbone_embed_dim: int = 512
    temporal_hidden_dim: int = 512
    spatial_token_dim: int = 512
    n_heads: int = 8
    n_transformer_layers: int = 2
    weather_dim: int = 8
    replication_factor: int = 10
    fusion_enabled: bool = False
    fusion_test_mode: bool = False
    backbone_pretrained: bool = False

    def __post_init__(self):
        object.__setattr__(self, "backbone_channels", tuple(self.backbone_channels))
        for name in (
            "tile_size",
            "grid_rows",
            "grid_cols",
            "backbone_embed_dim",
            "temporal_hidden_dim",
            "spatial_token_dim",
            "n_heads",
            "weather_dim",
            "replication_factor",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_transformer_layers < 0:
            raise ValueError("n_transformer_layers must be >= 0")
        if not self.backbone_channels or any(c <= 0 for c in self.backbone_channels):
            raise ValueError(f"backbone_channels must be positive, got {self.backbone_channels}")
        if self.backbone_channels[-1] != self.backbone_embed_dim:
            raise ValueError(
                f"backbone_channels must end at backbone_embed_dim: "
                f"{self.backbone_channels[-1]} != {self.backbone_embed_dim}"
            )
        # one width through the whole pipeline: the fusion block output feeds
        # the LSTM, whose hidden state feeds the transformer tokens
        if self.temporal_hidden_dim != self.backbone_embed_dim:
            raise ValueError(
                f"temporal_hidden_dim {self.temporal_hidden_dim} must equal "
                f"backbone_embed_dim {self.backbone_embed_dim}"
            )
        if self.spatial_token_dim != self.temporal_hidden_dim:
            raise ValueError(
                f"spatial_token_dim {self.spatial_token_dim} must equal "
                f"temporal_hidden_dim {self.temporal_hidden_dim}"
            )
        if self.spatial_token_dim % self.n_heads != 0:
            raise ValueError(
                f"spatial_token_dim {self.spatial_token_dim} not divisible by "
                f"n_heads {self.n_heads}"
            )
        if self.fusion_test_mode and not self.fusion_enabled:
            raise ValueError("fusion_test_mode requires fusion_enabled")

    @property
    def n_tiles(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def fused_width(self) -> int:
        return self.backbone_embed_dim + self.weather_dim * self.replication_factor


TOY_CONFIG = ModelConfig(
    tile_size=32,
    grid_rows=2,
    grid_cols=3,
    backbone_channels=(16, 32),
    backbone_embed_dim=32,
    temporal_hidden_dim=32,
    spatial_token_dim=32,
    n_heads=4,
    n_transformer_layers=1,
)


@dataclass(frozen=True)
class ModelOutput:
    cnn_tile_logits: np.ndarray  # (N, n_tiles)
    temporal_tile_logits: np.ndarray
    spatial_tile_logits: np.ndarray
    image_logit: np.ndarray  # (N,)

    def __post_init__(self):
        for name in ("cnn_tile_logits", "temporal_tile_logits", "spatial_tile_logits", "image_logit"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def image_probability(self) -> np.ndarray:
        return sigmoid(self.image_logit)

    @property
    def tile_probabilities(self) -> dict[str, np.ndarray]:
        return {
            "cnn": sigmoid(self.cnn_tile_logits),
            "temporal": sigmoid(self.temporal_tile_logits),
            "spatial": sigmoid(self.spatial_tile_logits),
        }


class SmokeDetector(Module):
    def __init__(self, config: ModelConfig, seed_or_rng=0):
        rng = (
            seed_or_rng
            if isinstance(seed_or_rng, np.random.Generator)
            else np.random.default_rng(seed_or_rng)
        )
        self.config = config
        e = config.backbone_embed_dim
        d = config.spatial_token_dim
        t = config.n_tiles
        self.backbone = TileEncoder(config.backbone_channels, e, rng)
        if config.fusion_enabled:
            self.fusion_cnn = FusionBlock(
                e, config.weather_dim, config.replication_factor, rng,
                test_mode=config.fusion_test_mode,
            )
        self.lstm = LSTM2(e, config.temporal_hidden_dim, rng)
        if config.fusion_enabled:
            self.fusion_lstm = FusionBlock(
                config.temporal_hidden_dim, config.weather_dim, config.replication_factor,
                rng, test_mode=config.fusion_test_mode,
            )
        self.cls = Parameter(rng.normal(0.0, 0.02, size=d))
        self.pos = Parameter(rng.normal(0.0, 0.02, size=(t + 1, d)))
        self.vit_blocks = [
            TransformerBlock(d, config.n_heads, rng) for _ in range(config.n_transformer_layers)
        ]
        self.head_cnn = Linear(e, 1, rng)
        self.head_temporal = Linear(config.temporal_hidden_dim, 1, rng)
        self.head_spatial = Linear(d, 1, rng)
        self.head_image_fc1 = Linear(d, d, rng)
        self.head_image_act = ReLU()
        self.head_image_fc2 = Linear(d, 1, rng)

    # ----------------------------------------------------------------- stages

    def encode_tiles(self, tiles) -> np.ndarray:
        """TileGrid or (M, s, s, 3) array -> (M, embed_dim) embeddings."""
        if isinstance(tiles, TileGrid):
            if tiles.normalized is False:
                raise ValueError("tiles must be normalized before encoding")
            arr = tiles.tiles
        else:
            arr = np.asarray(tiles)
        self._check_tile_shape(arr)
        emb, _ = self.backbone.forward(arr)
        return emb

    def spatial_encode(self, tile_embeddings: np.ndarray):
        """(N, n_tiles, D) fused embeddings -> (tile tokens, cls token)."""
        out, _ = self._spatial_forward(tile_embeddings)
        return out

    def _check_tile_shape(self, arr: np.ndarray) -> None:
        s = self.config.tile_size
        if arr.ndim != 4 or arr.shape[1:] != (s, s, 3):
            raise ValueError(f"expected (M, {s}, {s}, 3) tiles, got {arr.shape}")

    def _spatial_forward(self, h: np.ndarray):
        cfg = self.config
        n, t, d = h.shape
        if t != cfg.n_tiles:
            raise ValueError(f"token count {t} does not match grid {cfg.n_tiles}")
        cls_tok = np.broadcast_to(self.cls.value, (n, 1, d))
        tokens = np.concatenate([cls_tok, h], axis=1) + self.pos.value
        caches = []
        for block in self.vit_blocks:
            tokens, c = block.forward(tokens)
            caches.append(c)
        return (tokens[:, 1:, :], tokens[:, 0, :]), caches

    def _spatial_backward(self, g_tile_tokens, g_cls, caches):
        g_tokens = np.concatenate([g_cls[:, None, :], g_tile_tokens], axis=1)
        for block, c in zip(reversed(self.vit_blocks), reversed(caches)):
            g_tokens = block.backward(g_tokens, c)
        self.pos.grad += g_tokens.sum(axis=0)
        self.cls.grad += g_tokens[:, 0, :].sum(axis=0)
        return g_tokens[:, 1:, :]

    # ---------------------------------------------------------------- forward

    def forward(self, prev_tiles: np.ndarray, curr_tiles: np.ndarray, weather=None):
        """Batched forward pass.

        prev_tiles, curr_tiles: (N, n_tiles, s, s, 3) normalized pixels.
        weather: (N, weather_dim) normalized vectors; required iff fusion
        is enabled.  Returns (ModelOutput, cache).
        """
        cfg = self.config
        if prev_tiles.shape != curr_tiles.shape:
            raise ValueError(
                f"frame shapes differ: {prev_tiles.shape} vs {curr_tiles.shape}"
            )
        s = cfg.tile_size
        if prev_tiles.ndim != 5 or prev_tiles.shape[1:] != (cfg.n_tiles, s, s, 3):
            raise ValueError(
                f"expected (N, {cfg.n_tiles}, {s}, {s}, 3) tile batches, "
                f"got {prev_tiles.shape}"
            )
        n, t = prev_tiles.shape[:2]
        if cfg.fusion_enabled:
            if weather is None:
                raise ValueError("fusion enabled but no weather provided")
            weather = np.asarray(weather, dtype=np.float64)
            if weather.shape != (n, cfg.weather_dim):
                raise ValueError(
                    f"weather shape {weather.shape} != ({n}, {cfg.weather_dim})"
                )
        elif weather is not None:
            raise ValueError("weather provided but fusion is disabled")

        e = cfg.backbone_embed_dim
        # both frames share the backbone; run them as one batch
        both = np.concatenate([prev_tiles, curr_tiles], axis=0)
        emb_all, c_bb = self.backbone.forward(both.reshape(2 * n * t, *both.shape[2:]))
        emb_frames = emb_all.reshape(2 * n, t, e)

        c_fcnn = None
        if cfg.fusion_enabled:
            w2 = np.concatenate([weather, weather], axis=0)
            emb_frames, c_fcnn = self.fusion_cnn.forward(emb_frames, w2)
        e_prev, e_curr = emb_frames[:n], emb_frames[n:]

        h2, c_lstm = self.lstm.forward(
            e_prev.reshape(n * t, e), e_curr.reshape(n * t, e)
        )
        h = h2.reshape(n, t, cfg.temporal_hidden_dim)

        c_flstm = None
        if cfg.fusion_enabled:
            h, c_flstm = self.fusion_lstm.forward(h, weather)

        (tile_tokens, cls_out), c_vit = self._spatial_forward(h)

        cnn_logits, c_hc = self.head_cnn.forward(e_curr)
        temporal_logits, c_ht = self.head_temporal.forward(h)
        spatial_logits, c_hs = self.head_spatial.forward(tile_tokens)
        img_h, c_i1 = self.head_image_fc1.forward(cls_out)
        img_r, c_ia = self.head_image_act.forward(img_h)
        img_logit, c_i2 = self.head_image_fc2.forward(img_r)

        output = ModelOutput(
            cnn_tile_logits=cnn_logits[..., 0],
            temporal_tile_logits=temporal_logits[..., 0],
            spatial_tile_logits=spatial_logits[..., 0],
            image_logit=img_logit[..., 0],
        )
        cache = {
            "n": n,
            "t": t,
            "bb": c_bb,
            "fcnn": c_fcnn,
            "lstm": c_lstm,
            "flstm": c_flstm,
            "vit": c_vit,
            "hc": c_hc,
            "ht": c_ht,
            "hs": c_hs,
            "i1": c_i1,
            "ia": c_ia,
            "i2": c_i2,
        }
        return output, cache

    # --------------------------------------------------------------- backward

    def backward(self, head_grads: dict, cache: dict) -> dict:
        """Accumulate parameter gradients from per-head logit gradients.

        head_grads: {"cnn", "temporal", "spatial": (N, n_tiles), "image": (N,)}.
        Returns {"weather": (N, weather_dim) gradient or None}.
        """
        cfg = self.config
        n, t = cache["n"], cache["t"]
        e = cfg.backbone_embed_dim

        g_img_r = self.head_image_fc2.backward(head_grads["image"][:, None], cache["i2"])
        g_img_h = self.head_image_act.backward(g_img_r, cache["ia"])
        g_cls = self.head_image_fc1.backward(g_img_h, cache["i1"])
        g_tile_tokens = self.head_spatial.backward(
            head_grads["spatial"][..., None], cache["hs"]
        )
        g_h = self._spatial_backward(g_tile_tokens, g_cls, cache["vit"])
        g_h = g_h + self.head_temporal.backward(head_grads["temporal"][..., None], cache["ht"])

        g_weather = None
        if cfg.fusion_enabled:
            g_h, gw_lstm = self.fusion_lstm.backward(g_h, cache["flstm"])
            g_weather = gw_lstm

        g_prev_flat, g_curr_flat = self.lstm.backward(
            g_h.reshape(n * t, cfg.temporal_hidden_dim), cache["lstm"]
        )
        g_curr = g_curr_flat.reshape(n, t, e) + self.head_cnn.backward(
            head_grads["cnn"][..., None], cache["hc"]
        )
        g_prev = g_prev_flat.reshape(n, t, e)

        g_frames = np.concatenate([g_prev, g_curr], axis=0)
        if cfg.fusion_enabled:
            g_frames, gw_cnn = self.fusion_cnn.backward(g_frames, cache["fcnn"])
            g_weather = g_weather + gw_cnn[:n] + gw_cnn[n:]

        self.backbone.backward(g_frames.reshape(2 * n * t, e), cache["bb"])
        return {"weather": g_weather}
