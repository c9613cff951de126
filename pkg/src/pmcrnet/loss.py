"""Charbonnier + soft-census reconstruction loss and its annealed multi-scale sum."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor, record_op
from .warp import build_pyramid

TAU_MODES = ("annealed", "fixed", "off")

# soft ternary census constants for 0..255 intensities
CENSUS_SOFTNESS = 0.81
CENSUS_DISTANCE_OFFSET = 0.1


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.5
    epsilon: float = 1e-3
    census_patch: int = 7
    tau_start: float = 0.1
    tau_end: float = 0.0
    anneal_fraction: float = 0.25
    mode: str = "annealed"

    def __post_init__(self):
        if self.alpha <= 0 or self.epsilon <= 0:
            raise ValueError("alpha and epsilon must be positive")
        if self.census_patch < 3 or self.census_patch % 2 == 0:
            raise ValueError(f"census_patch must be odd and >= 3, got {self.census_patch}")
        if self.mode not in TAU_MODES:
            raise ValueError(f"unknown tau mode {self.mode!r}; expected one of {TAU_MODES}")
        if not 0 < self.anneal_fraction <= 1:
            raise ValueError("anneal_fraction must lie in (0, 1]")


@dataclass
class LossBreakdown:
    charbonnier_0: float
    census_0: float
    level_terms: dict[int, float]
    tau: float
    total: Tensor = field(repr=False)

    @property
    def value(self) -> float:
        return self.total.item()

    def as_dict(self) -> dict[str, float]:
        record = {"loss": self.value, "charb0": self.charbonnier_0, "census0": self.census_0, "tau": self.tau}
        for level, term in sorted(self.level_terms.items()):
            record[f"lr{level}"] = term
        return record


def robust(x: Tensor, cfg: LossConfig) -> Tensor:
    """Elementwise (x^2 + eps^2)^alpha."""
    return T.power(T.add(T.square(x), cfg.epsilon**2), cfg.alpha)


def charbonnier(diff: Tensor, cfg: LossConfig | None = None) -> Tensor:
    return T.mean(robust(diff, cfg or LossConfig()))


def intensity(image: Tensor) -> Tensor:
    """RGB mean on a 0..255 scale, written as channel sum times 85."""
    return T.mul(T.sum(image, axis=1, keepdims=True), 85.0)


def neighbor_differences(x: Tensor, radius: int) -> Tensor:
    """(n, 1, h, w) -> (n, k*k-1, h-2r, w-2r): neighbor minus center for every window offset."""
    n, c, h, w = x.shape
    if c != 1:
        raise ValueError("neighbor_differences expects a single channel")
    oh, ow = h - 2 * radius, w - 2 * radius
    offsets = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1) if dy or dx]
    xd = x.data[:, 0]
    center = xd[:, radius : radius + oh, radius : radius + ow]
    out = np.empty((n, len(offsets), oh, ow), dtype=x.dtype)
    for k, (dy, dx) in enumerate(offsets):
        out[:, k] = xd[:, radius + dy : radius + dy + oh, radius + dx : radius + dx + ow] - center

    def grad(g):
        gx = np.zeros((n, h, w), dtype=g.dtype)
        for k, (dy, dx) in enumerate(offsets):
            gx[:, radius + dy : radius + dy + oh, radius + dx : radius + dx + ow] += g[:, k]
        gx[:, radius : radius + oh, radius : radius + ow] -= g.sum(axis=1)
        return (gx[:, None],)

    return record_op(out, (x,), grad)


def soft_census(image: Tensor, patch: int = 7) -> Tensor:
    d = neighbor_differences(intensity(image), patch // 2)
    return T.div(d, T.sqrt(T.add(T.square(d), CENSUS_SOFTNESS)))


def census_loss(a: Tensor, b: Tensor, cfg: LossConfig | None = None) -> Tensor:
    """Robust-penalised soft Hamming distance between census transforms.

    Pixels closer than patch//2 to a border are excluded from the average.
    """
    cfg = cfg or LossConfig()
    if a.shape != b.shape:
        raise ValueError(f"census_loss shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[2] < cfg.census_patch or a.shape[3] < cfg.census_patch:
        raise ValueError(f"census_loss needs images of at least {cfg.census_patch}x{cfg.census_patch}, got {a.shape}")
    e = T.sub(soft_census(a, cfg.census_patch), soft_census(b, cfg.census_patch))
    e2 = T.square(e)
    hamming = T.sum(T.div(e2, T.add(e2, CENSUS_DISTANCE_OFFSET)), axis=1, keepdims=True)
    return T.mean(robust(hamming, cfg))


def reconstruction_loss(pred: Tensor, gt: Tensor, cfg: LossConfig | None = None) -> Tensor:
    cfg = cfg or LossConfig()
    if pred.shape != gt.shape:
        raise ValueError(f"reconstruction_loss shape mismatch: {pred.shape} vs {gt.shape}")
    return T.add(charbonnier(T.sub(pred, gt), cfg), census_loss(pred, gt, cfg))


def tau(epoch: float, total_epochs: int, cfg: LossConfig | None = None) -> float:
    """Weight of the auxiliary pyramid terms at (fractional) ``epoch``."""
    cfg = cfg or LossConfig()
    if cfg.mode == "off":
        return 0.0
    if cfg.mode == "fixed":
        return cfg.tau_start
    horizon = total_epochs * cfg.anneal_fraction
    if epoch >= horizon:
        return cfg.tau_end
    frac = epoch / horizon
    return cfg.tau_start * (1.0 - frac) + cfg.tau_end * frac


def total_loss(states, gt: Tensor, epoch: float, total_epochs: int, cfg: LossConfig | None = None) -> LossBreakdown:
    """Full-resolution reconstruction plus tau-weighted terms at levels 1..3.

    ``states`` maps level -> object with a ``frame`` attribute (or a Tensor).
    """
    cfg = cfg or LossConfig()
    frames = {level: getattr(s, "frame", s) for level, s in states.items()}
    if frames[0].shape != gt.shape:
        raise ValueError(f"total_loss: prediction {frames[0].shape} vs ground truth {gt.shape}")
    pyramid = build_pyramid(gt, 4)
    weight = tau(epoch, total_epochs, cfg)
    charb0 = charbonnier(T.sub(frames[0], gt), cfg)
    cen0 = census_loss(frames[0], gt, cfg)
    total = T.add(charb0, cen0)
    level_terms = {}
    aux = None
    for level in (1, 2, 3):
        pred, target = frames[level], pyramid[level]
        if min(pred.shape[2:]) < cfg.census_patch:
            # coarse level smaller than the census window: photometric term only
            term = charbonnier(T.sub(pred, target), cfg)
        else:
            term = reconstruction_loss(pred, target, cfg)
        level_terms[level] = term.item()
        aux = term if aux is None else T.add(aux, term)
    total = T.add(total, T.mul(aux, weight))
    return LossBreakdown(charb0.item(), cen0.item(), level_terms, weight, total)
