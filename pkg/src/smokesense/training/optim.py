"""AdamW: Adam moment estimates with decoupled weight decay.

The decay term is applied directly to the weights (p -= lr * wd * p)
rather than folded into the gradient, so a parameter with zero gradient
still shrinks by exactly (1 - lr * wd) per step.
"""

from __future__ import annotations

import numpy as np

from smokesense.model.params import Module, Parameter


class AdamW:
    def __init__(
        self,
        module: Module,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-3,
    ):
        if lr < 0 or eps <= 0 or weight_decay < 0:
            raise ValueError("lr and weight_decay must be >= 0, eps > 0")
        b1, b2 = betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        self.module = module
        self.lr = lr
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._params: list[tuple[str, Parameter]] = list(module.named_parameters())
        self._m = {name: np.zeros_like(p.value) for name, p in self._params}
        self._v = {name: np.zeros_like(p.value) for name, p in self._params}

    def zero_grad(self) -> None:
        self.module.zero_grad()

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for name, p in self._params:
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise ValueError(f"non-finite gradient in {name}")
            m = self._m[name]
            v = self._v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * np.square(g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.value -= self.lr * (update + self.weight_decay * p.value)
