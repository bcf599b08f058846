"""Per-tile convolutional encoder.

A small residual stack: strided stem, alternating residual blocks and
strided downsamples through the channel schedule, and a final residual
block, global-average-pooled to one embedding per tile. The last channel
count is the embedding width, so the schedule is the capacity knob
(desk-scale configs use e.g. (16, 32); full scale (64, 128, 256, 512)).
"""

from __future__ import annotations

import numpy as np

from smokesense.model.layers import Conv2d, ReLU
from smokesense.model.params import Module


class ResidualBlock(Module):
    """conv-relu-conv with an identity skip, rectified after the add."""

    def __init__(self, ch: int, rng: np.random.Generator):
        self.conv1 = Conv2d(ch, ch, 3, rng, stride=1, pad=1)
        self.act1 = ReLU()
        self.conv2 = Conv2d(ch, ch, 3, rng, stride=1, pad=1)
        self.act_out = ReLU()

    def forward(self, x: np.ndarray):
        y, c1 = self.conv1.forward(x)
        y, c2 = self.act1.forward(y)
        y, c3 = self.conv2.forward(y)
        out, c4 = self.act_out.forward(x + y)
        return out, (c1, c2, c3, c4)

    def backward(self, grad: np.ndarray, cache):
        c1, c2, c3, c4 = cache
        gsum = self.act_out.backward(grad, c4)
        gy = self.conv2.backward(gsum, c3)
        gy = self.act1.backward(gy, c2)
        gy = self.conv1.backward(gy, c1)
        return gsum + gy


class Downsample(Module):
    """Strided conv halving the spatial extent while changing channels."""

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator):
        self.conv = Conv2d(in_ch, out_ch, 3, rng, stride=2, pad=1)
        self.act = ReLU()

    def forward(self, x: np.ndarray):
        y, c1 = self.conv.forward(x)
        out, c2 = self.act.forward(y)
        return out, (c1, c2)

    def backward(self, grad: np.ndarray, cache):
        c1, c2 = cache
        return self.conv.backward(self.act.backward(grad, c2), c1)


class TileEncoder(Module):
    def __init__(self, channels: tuple[int, ...], embed_dim: int, rng: np.random.Generator):
        if not channels or any(c <= 0 for c in channels):
            raise ValueError(f"backbone channels must be positive, got {channels}")
        if channels[-1] != embed_dim:
            raise ValueError(
                f"last backbone channel count {channels[-1]} must equal embed dim {embed_dim}"
            )
        self.embed_dim = embed_dim
        self.stem = Conv2d(3, channels[0], 3, rng, stride=2, pad=1)
        self.stem_act = ReLU()
        blocks: list[Module] = []
        for cin, cout in zip(channels, channels[1:]):
            blocks.append(ResidualBlock(cin, rng))
            blocks.append(Downsample(cin, cout, rng))
        blocks.append(ResidualBlock(channels[-1], rng))
        self.blocks = blocks

    def forward(self, tiles: np.ndarray):
        """(M, s, s, 3) tile batch -> (M, embed_dim) pooled embeddings."""
        if tiles.ndim != 4 or tiles.shape[3] != 3:
            raise ValueError(f"expected (M, s, s, 3) tiles, got {tiles.shape}")
        y, c_stem = self.stem.forward(tiles)
        y, c_act = self.stem_act.forward(y)
        block_caches = []
        for block in self.blocks:
            y, c = block.forward(y)
            block_caches.append(c)
        emb = y.mean(axis=(1, 2))
        return emb, (c_stem, c_act, block_caches, y.shape)

    def backward(self, grad: np.ndarray, cache):
        c_stem, c_act, block_caches, feat_shape = cache
        m, h, w, e = feat_shape
        gy = np.broadcast_to(grad[:, None, None, :] / (h * w), feat_shape)
        for block, c in zip(reversed(self.blocks), reversed(block_caches)):
            gy = block.backward(gy, c)
        gy = self.stem_act.backward(gy, c_act)
        return self.stem.backward(gy, c_stem)
