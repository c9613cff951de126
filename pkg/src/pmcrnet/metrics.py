"""PSNR, SSIM and Middlebury interpolation error on [0, 1] images."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred.data if isinstance(pred, Tensor) else pred, dtype=np.float64)
    g = np.asarray(gt.data if isinstance(gt, Tensor) else gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    return np.clip(p, 0.0, 1.0), np.clip(g, 0.0, 1.0)


def mse(pred, gt) -> float:
    p, g = _pair(pred, gt)
    return float(np.mean((p - g) ** 2))


def psnr(pred, gt) -> float:
    err = mse(pred, gt)
    if err == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, float(10.0 * np.log10(1.0 / err)))


def interpolation_error(pred, gt) -> float:
    """RMS difference on the 0..255 scale over all pixels and channels."""
    return float(255.0 * np.sqrt(mse(pred, gt)))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 'valid' filtering over the last two axes."""
    k = kernel.size
    rows = np.lib.stride_tricks.sliding_window_view(img, k, axis=-2) @ kernel
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=-1) @ kernel


def ssim(pred, gt) -> float:
    """Single-scale SSIM with an 11x11 Gaussian window, averaged over channels and space.

    Accepts (h, w), (c, h, w) or (n, c, h, w) arrays with values in [0, 1].
    """
    p, g = _pair(pred, gt)
    if p.shape[-1] < SSIM_WINDOW or p.shape[-2] < SSIM_WINDOW:
        raise ValueError(f"ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {p.shape}")
    c1, c2 = SSIM_K1**2, SSIM_K2**2
    win = _gaussian_window()
    mu_p, mu_g = _filter_valid(p, win), _filter_valid(g, win)
    var_p = _filter_valid(p * p, win) - mu_p**2
    var_g = _filter_valid(g * g, win) - mu_g**2
    cov = _filter_valid(p * g, win) - mu_p * mu_g
    num = (2 * mu_p * mu_g + c1) * (2 * cov + c2)
    den = (mu_p**2 + mu_g**2 + c1) * (var_p + var_g + c2)
    return float(np.mean(num / den))


METRICS = {"psnr": psnr, "ssim": ssim, "ie": interpolation_error}


@dataclass
class MetricReport:
    metrics: tuple[str, ...]
    ids: list[str] = field(default_factory=list)
    samples: list[dict[str, float]] = field(default_factory=list)
    baseline: list[dict[str, float]] = field(default_factory=list)

    def add(self, sample_id: str, pred, gt, baseline_pred=None) -> None:
        self.ids.append(sample_id)
        self.samples.append({m: METRICS[m](pred, gt) for m in self.metrics})
        if baseline_pred is not None:
            self.baseline.append({m: METRICS[m](baseline_pred, gt) for m in self.metrics})

    @staticmethod
    def _means(rows: list[dict[str, float]], metrics) -> dict[str, float]:
        return {m: float(np.mean([r[m] for r in rows])) for m in metrics} if rows else {}

    @property
    def mean(self) -> dict[str, float]:
        return self._means(self.samples, self.metrics)

    @property
    def baseline_mean(self) -> dict[str, float]:
        return self._means(self.baseline, self.metrics)

    def to_lines(self) -> list[str]:
        """One key=value record per sample, then the mean and baseline rows."""
        lines = []
        for sid, row in zip(self.ids, self.samples):
            lines.append(" ".join([f"sample={sid}"] + [f"{m}={row[m]:.6f}" for m in self.metrics]))
        lines.append(" ".join(["sample=MEAN"] + [f"{m}={v:.6f}" for m, v in self.mean.items()]))
        if self.baseline:
            lines.append(" ".join(["sample=BLEND_BASELINE"] + [f"{m}={v:.6f}" for m, v in self.baseline_mean.items()]))
        return lines
