"""Trainable parameters and the module tree they hang from."""

from __future__ import annotations

from typing import Iterator

import numpy as np


class Parameter:
    """A float64 array with an accumulated gradient of the same shape."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter(shape={self.value.shape})"


class Module:
    """Base class; parameters and submodules are discovered from attributes.

    Iteration order follows attribute insertion order, so parameter names
    are stable across constructions of the same architecture.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, attr in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(attr, Parameter):
                yield path, attr
            elif isinstance(attr, Module):
                yield from attr.named_parameters(prefix=f"{path}.")
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        yield from item.named_parameters(prefix=f"{path}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())
