"""Hand-rolled layers with explicit forward caches and backward passes.

Every layer follows the same protocol: ``forward(x) -> (out, cache)`` and
``backward(grad, cache) -> grad_in``, with parameter gradients accumulated
in place. Caches are returned rather than stored so a layer instance can
appear several times in one computation graph (the tile backbone runs on
both frames, the fusion block at two injection points).

All math is float64; convolutions ride the im2col/col2im kernels.
"""

from __future__ import annotations

import numpy as np

from smokesense.kernels import col2im, conv_out_size, im2col
from smokesense.model.params import Module, Parameter


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_last(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Linear(Module):
    """Affine map over the last axis; leading axes are flattened internally."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        if in_dim <= 0 or out_dim <= 0:
            raise ValueError(f"linear dims must be positive, got {in_dim}->{out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.W = Parameter(he_uniform(rng, (in_dim, out_dim), in_dim))
        self.b = Parameter(np.zeros(out_dim))

    def forward(self, x: np.ndarray):
        lead = x.shape[:-1]
        x2 = x.reshape(-1, self.in_dim)
        out = x2 @ self.W.value + self.b.value
        return out.reshape(*lead, self.out_dim), (x2, lead)

    def backward(self, grad: np.ndarray, cache):
        x2, lead = cache
        g2 = grad.reshape(-1, self.out_dim)
        self.W.grad += x2.T @ g2
        self.b.grad += g2.sum(axis=0)
        return (g2 @ self.W.value.T).reshape(*lead, self.in_dim)


class ReLU(Module):
    def forward(self, x: np.ndarray):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad: np.ndarray, cache):
        return grad * cache


class Conv2d(Module):
    """NHWC convolution via im2col + one matmul.

    Weights are stored flat as (k*k*in_ch, out_ch), matching the im2col
    column order (i*k + j)*C + c.
    """

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        k: int,
        rng: np.random.Generator,
        stride: int = 1,
        pad: int = 0,
    ):
        if min(in_ch, out_ch, k, stride) <= 0 or pad < 0:
            raise ValueError("conv dims must be positive (pad >= 0)")
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.k = k
        self.stride = stride
        self.pad = pad
        fan_in = k * k * in_ch
        self.W = Parameter(he_uniform(rng, (fan_in, out_ch), fan_in))
        self.b = Parameter(np.zeros(out_ch))

    def forward(self, x: np.ndarray):
        n, h, w, c = x.shape
        if c != self.in_ch:
            raise ValueError(f"expected {self.in_ch} input channels, got {c}")
        p = self.pad
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else np.ascontiguousarray(x)
        oh = conv_out_size(h + 2 * p, self.k, self.stride)
        ow = conv_out_size(w + 2 * p, self.k, self.stride)
        cols = im2col(xp, self.k, self.k, self.stride)
        out = (cols @ self.W.value + self.b.value).reshape(n, oh, ow, self.out_ch)
        return out, (cols, xp.shape, (h, w))

    def backward(self, grad: np.ndarray, cache):
        cols, xp_shape, (h, w) = cache
        n, hp, wp, c = xp_shape
        g2 = grad.reshape(-1, self.out_ch)
        self.W.grad += cols.T @ g2
        self.b.grad += g2.sum(axis=0)
        gcols = np.ascontiguousarray(g2 @ self.W.value.T)
        gxp = col2im(gcols, n, hp, wp, c, self.k, self.k, self.stride)
        p = self.pad
        return gxp[:, p : p + h, p : p + w, :] if p else gxp


class LayerNorm(Module):
    """Normalization over the last axis with learned scale and shift."""

    def __init__(self, dim: int, eps: float = 1e-5):
        self.dim = dim
        self.eps = eps
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))

    def forward(self, x: np.ndarray):
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        out = xhat * self.gamma.value + self.beta.value
        return out, (xhat, inv)

    def backward(self, grad: np.ndarray, cache):
        xhat, inv = cache
        self.gamma.grad += (grad * xhat).reshape(-1, self.dim).sum(axis=0)
        self.beta.grad += grad.reshape(-1, self.dim).sum(axis=0)
        gx = grad * self.gamma.value
        mean_g = gx.mean(axis=-1, keepdims=True)
        mean_gx = (gx * xhat).mean(axis=-1, keepdims=True)
        return (gx - mean_g - xhat * mean_gx) * inv


class LSTM2(Module):
    """Two-step LSTM cell over (previous, current); returns the final hidden state.

    Gate layout along the last axis of the packed weights: input, forget,
    cell, output. The forget-gate bias starts at 1.
    """

    def __init__(self, in_dim: int, hidden_dim: int, rng: np.random.Generator):
        if in_dim <= 0 or hidden_dim <= 0:
            raise ValueError("lstm dims must be positive")
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        lim_x = np.sqrt(6.0 / (in_dim + 4 * hidden_dim))
        lim_h = np.sqrt(6.0 / (hidden_dim + 4 * hidden_dim))
        self.Wx = Parameter(rng.uniform(-lim_x, lim_x, size=(in_dim, 4 * hidden_dim)))
        self.Wh = Parameter(rng.uniform(-lim_h, lim_h, size=(hidden_dim, 4 * hidden_dim)))
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim : 2 * hidden_dim] = 1.0
        self.b = Parameter(b)

    def _step(self, x, h, c):
        hd = self.hidden_dim
        z = x @ self.Wx.value + h @ self.Wh.value + self.b.value
        i = sigmoid(z[:, :hd])
        f = sigmoid(z[:, hd : 2 * hd])
        g = np.tanh(z[:, 2 * hd : 3 * hd])
        o = sigmoid(z[:, 3 * hd :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        return h_new, c_new, (x, h, c, i, f, g, o, tc)

    def forward(self, x_prev: np.ndarray, x_curr: np.ndarray):
        if x_prev.shape != x_curr.shape:
            raise ValueError(
                f"frame embedding shapes differ: {x_prev.shape} vs {x_curr.shape}"
            )
        m = x_prev.shape[0]
        h0 = np.zeros((m, self.hidden_dim))
        c0 = np.zeros((m, self.hidden_dim))
        h1, c1, cache1 = self._step(x_prev, h0, c0)
        h2, _, cache2 = self._step(x_curr, h1, c1)
        return h2, (cache1, cache2)

    def _step_back(self, gh, gc_in, cache):
        x, h_prev, c_prev, i, f, g, o, tc = cache
        go = gh * tc
        gc = gc_in + gh * o * (1.0 - tc * tc)
        gi = gc * g
        gg = gc * i
        gf = gc * c_prev
        gc_prev = gc * f
        gz = np.concatenate(
            [
                gi * i * (1.0 - i),
                gf * f * (1.0 - f),
                gg * (1.0 - g * g),
                go * o * (1.0 - o),
            ],
            axis=1,
        )
        self.Wx.grad += x.T @ gz
        self.Wh.grad += h_prev.T @ gz
        self.b.grad += gz.sum(axis=0)
        gx = gz @ self.Wx.value.T
        gh_prev = gz @ self.Wh.value.T
        return gx, gh_prev, gc_prev

    def backward(self, grad_h2: np.ndarray, cache):
        cache1, cache2 = cache
        gx_curr, gh1, gc1 = self._step_back(grad_h2, np.zeros_like(grad_h2), cache2)
        gx_prev, _, _ = self._step_back(gh1, gc1, cache1)
        return gx_prev, gx_curr


class MultiHeadAttention(Module):
    """Softmax attention over a (N, T, D) token sequence."""

    def __init__(self, dim: int, n_heads: int, rng: np.random.Generator):
        if dim % n_heads != 0:
            raise ValueError(f"token dim {dim} not divisible by {n_heads} heads")
        self.dim = dim
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)

    def _split(self, x, n, t):
        return x.reshape(n, t, self.n_heads, self.head_dim).transpose(0, 2, 1, 3)

    def _merge(self, x, n, t):
        return x.transpose(0, 2, 1, 3).reshape(n, t, self.dim)

    def forward(self, x: np.ndarray):
        n, t, _ = x.shape
        q_f, cq = self.wq.forward(x)
        k_f, ck = self.wk.forward(x)
        v_f, cv = self.wv.forward(x)
        q = self._split(q_f, n, t)
        k = self._split(k_f, n, t)
        v = self._split(v_f, n, t)
        scale = 1.0 / np.sqrt(self.head_dim)
        scores = (q @ k.swapaxes(-1, -2)) * scale
        attn = softmax_last(scores)
        ctx = self._merge(attn @ v, n, t)
        out, co = self.wo.forward(ctx)
        return out, (cq, ck, cv, co, q, k, v, attn, (n, t))

    def backward(self, grad: np.ndarray, cache):
        cq, ck, cv, co, q, k, v, attn, (n, t) = cache
        scale = 1.0 / np.sqrt(self.head_dim)
        gctx = self._split(self.wo.backward(grad, co), n, t)
        gattn = gctx @ v.swapaxes(-1, -2)
        gv = attn.swapaxes(-1, -2) @ gctx
        gscores = (gattn - (gattn * attn).sum(axis=-1, keepdims=True)) * attn * scale
        gq = gscores @ k
        gk = gscores.swapaxes(-1, -2) @ q
        gx = self.wq.backward(self._merge(gq, n, t), cq)
        gx = gx + self.wk.backward(self._merge(gk, n, t), ck)
        gx = gx + self.wv.backward(self._merge(gv, n, t), cv)
        return gx


class TransformerBlock(Module):
    """Pre-norm encoder block: attention and MLP, each behind a residual."""

    def __init__(self, dim: int, n_heads: int, rng: np.random.Generator, mlp_ratio: int = 4):
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, n_heads, rng)
        self.ln2 = LayerNorm(dim)
        self.fc1 = Linear(dim, mlp_ratio * dim, rng)
        self.act = ReLU()
        self.fc2 = Linear(mlp_ratio * dim, dim, rng)

    def forward(self, x: np.ndarray):
        a, c_ln1 = self.ln1.forward(x)
        m, c_attn = self.attn.forward(a)
        x1 = x + m
        bnorm, c_ln2 = self.ln2.forward(x1)
        h, c_fc1 = self.fc1.forward(bnorm)
        r, c_act = self.act.forward(h)
        f, c_fc2 = self.fc2.forward(r)
        return x1 + f, (c_ln1, c_attn, c_ln2, c_fc1, c_act, c_fc2)

    def backward(self, grad: np.ndarray, cache):
        c_ln1, c_attn, c_ln2, c_fc1, c_act, c_fc2 = cache
        gr = self.fc2.backward(grad, c_fc2)
        gh = self.act.backward(gr, c_act)
        gb = self.fc1.backward(gh, c_fc1)
        gx1 = grad + self.ln2.backward(gb, c_ln2)
        ga = self.attn.backward(gx1, c_attn)
        return gx1 + self.ln1.backward(ga, c_ln1)
