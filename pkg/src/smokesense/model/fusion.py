"""Weather fusion: replicate, concatenate, map back to the embedding width.

The 8-component weather vector is repeated ``replication_factor`` times
(80 values at defaults), concatenated onto every tile embedding (the same
vector for all tiles of a sample), and a hidden layer restores the
original width so downstream stages are unchanged. In test mode the block
carries an identity-on-embedding, zero-on-weather weight pattern with no
nonlinearity, making the fused model's forward equal the unfused one; that
is the lever behind transfer-equivalence checks.
"""

from __future__ import annotations

import numpy as np

from smokesense.model.layers import Linear, ReLU
from smokesense.model.params import Module
from smokesense.weather.types import WeatherVector


class FusionBlock(Module):
    def __init__(
        self,
        embed_dim: int,
        weather_dim: int,
        replication_factor: int,
        rng: np.random.Generator,
        test_mode: bool = False,
    ):
        if min(embed_dim, weather_dim, replication_factor) <= 0:
            raise ValueError(
                "fusion dims must be positive, got "
                f"embed={embed_dim} weather={weather_dim} replication={replication_factor}"
            )
        self.embed_dim = embed_dim
        self.weather_dim = weather_dim
        self.replication_factor = replication_factor
        self.pad_width = weather_dim * replication_factor
        self.input_width = embed_dim + self.pad_width
        self.test_mode = test_mode
        self.linear = Linear(self.input_width, embed_dim, rng)
        self.act = ReLU()
        if test_mode:
            self.set_test_mode_weights()

    def set_test_mode_weights(self) -> None:
        """Identity on the embedding block, zeros elsewhere: fused == unfused."""
        self.linear.W.value[...] = 0.0
        self.linear.W.value[: self.embed_dim, :] = np.eye(self.embed_dim)
        self.linear.b.value[...] = 0.0

    def set_transfer_weights(self, rng: np.random.Generator) -> None:
        """Identity pathway for the transferred embedding, small random
        weights on the new weather rows, zero bias."""
        limit = 1.0 / np.sqrt(self.input_width)
        self.linear.W.value[: self.embed_dim, :] = np.eye(self.embed_dim)
        self.linear.W.value[self.embed_dim :, :] = rng.uniform(
            -limit, limit, size=(self.pad_width, self.embed_dim)
        )
        self.linear.b.value[...] = 0.0

    def forward(self, emb: np.ndarray, weather: np.ndarray):
        """(N, T, E) embeddings + (N, weather_dim) vectors -> (N, T, E)."""
        n, t, e = emb.shape
        if e != self.embed_dim:
            raise ValueError(f"embedding width {e} != fusion embed dim {self.embed_dim}")
        if weather.shape != (n, self.weather_dim):
            raise ValueError(
                f"weather batch shape {weather.shape} != ({n}, {self.weather_dim})"
            )
        wpad = np.tile(weather, (1, self.replication_factor))
        cat = np.concatenate(
            [emb, np.broadcast_to(wpad[:, None, :], (n, t, self.pad_width))], axis=2
        )
        h, c_lin = self.linear.forward(cat)
        if self.test_mode:
            return h, (c_lin, None)
        out, c_act = self.act.forward(h)
        return out, (c_lin, c_act)

    def backward(self, grad: np.ndarray, cache):
        """Returns (grad_embeddings, grad_weather)."""
        c_lin, c_act = cache
        gh = grad if self.test_mode else self.act.backward(grad, c_act)
        gcat = self.linear.backward(gh, c_lin)
        g_emb = gcat[..., : self.embed_dim]
        g_wpad = gcat[..., self.embed_dim :].sum(axis=1)
        n = g_wpad.shape[0]
        g_weather = g_wpad.reshape(n, self.replication_factor, self.weather_dim).sum(axis=1)
        return np.ascontiguousarray(g_emb), g_weather


def fuse_weather(embeddings: np.ndarray, weather: WeatherVector, block: FusionBlock) -> np.ndarray:
    """Single-sample fusion of (T, E) embeddings with one weather vector."""
    if not weather.normalized:
        raise ValueError("unnormalized weather passed to fusion")
    out, _ = block.forward(embeddings[None], weather.values[None])
    return out[0]
