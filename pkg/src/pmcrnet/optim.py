"""AdamW with decoupled weight decay and the cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass(frozen=True)
class AdamWConfig:
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-4


def cosine_lr(step: float, total_steps: int, lr_max: float = 1e-4, lr_min: float = 2e-5) -> float:
    """Half-cosine decay from ``lr_max`` at step 0 to ``lr_min`` at ``total_steps``."""
    if total_steps <= 0:
        return lr_max
    progress = min(max(step / total_steps, 0.0), 1.0)
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * progress))


class AdamW:
    """Per-parameter first/second moments plus a shared step counter."""

    def __init__(self, named_params: list[tuple[str, Tensor]], config: AdamWConfig | None = None):
        self.config = config or AdamWConfig()
        self.names = [name for name, _ in named_params]
        self.params = [p for _, p in named_params]
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.step_count = 0

    def step(self, grads: list[np.ndarray | None], lr: float) -> None:
        if len(grads) != len(self.params):
            raise ValueError(f"expected {len(self.params)} gradients, got {len(grads)}")
        for name, p, g in zip(self.names, self.params, grads):
            if g is not None and g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        b1, b2 = self.config.betas
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - b1**t
        bias2 = 1.0 - b2**t
        wd = self.config.weight_decay
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if g is None:
                g = np.zeros_like(p.data)
            g = g.astype(p.dtype, copy=False)
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * (g * g)
            update = (self.m[i] / bias1) / (np.sqrt(self.v[i] / bias2) + self.config.eps)
            p.data = (p.data - lr * (update + wd * p.data)).astype(p.dtype, copy=False)

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for name, m, v in zip(self.names, self.m, self.v):
            out[f"adam.m/{name}"] = m
            out[f"adam.v/{name}"] = v
        return out

    def load_state(self, state: dict[str, np.ndarray], step_count: int) -> None:
        for i, name in enumerate(self.names):
            self.m[i] = np.array(state[f"adam.m/{name}"], dtype=self.params[i].dtype)
            self.v[i] = np.array(state[f"adam.v/{name}"], dtype=self.params[i].dtype)
        self.step_count = step_count
