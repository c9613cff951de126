"""Training loop and dataset evaluation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .checkpoint import save_checkpoint
from .data import AugmentConfig, Triplet, augment, center_crop, make_rng, stack
from .loss import LossConfig, total_loss
from .metrics import METRICS, MetricReport
from .model import ModelConfig, PMCRNet
from .optim import AdamW, AdamWConfig, cosine_lr
from .tensor import Tape, Tensor


class NonFiniteLossError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch: int = 16
    lr_max: float = 1e-4
    lr_min: float = 2e-5
    weight_decay: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    crop: int = 256
    max_steps: int | None = None  # stop early (the cosine horizon follows it)
    checkpoint_every: int = 1  # epochs
    loss: LossConfig = field(default_factory=LossConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if not 0 < self.lr_min <= self.lr_max:
            raise ValueError(f"need 0 < lr_min <= lr_max, got {self.lr_min}, {self.lr_max}")
        if self.crop < 16 or self.crop % 16:
            raise ValueError(f"crop must be a positive multiple of 16, got {self.crop}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")

    def fingerprint(self) -> str:
        """Hash of the model and loss settings that define an ablation variant."""
        blob = json.dumps({"model": asdict(self.model), "loss": asdict(self.loss)}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


TOY_TRIPLETS = 4
TOY_CROP = 96
TOY_STEPS = 300


def toy_config(**overrides) -> TrainConfig:
    """CI preset: 4 triplets at 96x96 for 300 single-sample steps.

    One sample per step keeps the run inside a few minutes on one core.
    """
    base = dict(epochs=TOY_STEPS // TOY_TRIPLETS, batch=1, crop=TOY_CROP, max_steps=TOY_STEPS, checkpoint_every=25)
    base.update(overrides)
    return TrainConfig(**base)


def toy_dataset(triplets: Sequence[Triplet], count: int = TOY_TRIPLETS, crop: int = TOY_CROP) -> list[Triplet]:
    """First ``count`` triplets, centre-cropped once so the toy run sees a fixed set."""
    if len(triplets) < count:
        raise ValueError(f"toy run needs {count} triplets, dataset has {len(triplets)}")
    return [center_crop(t, crop) for t in triplets[:count]]


def format_record(record: dict) -> str:
    parts = []
    for key, value in record.items():
        parts.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return " ".join(parts)


@dataclass
class TrainResult:
    model: PMCRNet
    optimizer: AdamW
    losses: list[float]
    log: list[str]
    checkpoint: Path | None


def train(cfg: TrainConfig, dataset: Sequence[Triplet], out_dir=None,
          log: Callable[[str], None] | None = None, model: PMCRNet | None = None) -> TrainResult:
    """Optimise a model on ``dataset`` and return it with its per-step loss curve.

    Each epoch visits a seeded permutation of the triplets in ceil(N/batch)
    batches. The annealing weight uses the fractional epoch step/steps_per_epoch
    and the cosine learning rate is indexed by the global step.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    log_file = open(out / "train.log", "w") if out is not None else None

    def emit(record: dict) -> None:
        line = format_record(record)
        lines.append(line)
        if log_file is not None:
            log_file.write(line + "\n")
            log_file.flush()
        if log is not None:
            log(line)

    model = model or PMCRNet(cfg.model, seed=cfg.seed)
    optimizer = AdamW(model.named_parameters(), AdamWConfig(cfg.betas, cfg.adam_eps, cfg.weight_decay))
    aug_cfg = AugmentConfig(crop=cfg.crop)
    rng = make_rng(cfg.seed + 1)
    n = len(dataset)
    steps_per_epoch = math.ceil(n / cfg.batch)
    total_steps = steps_per_epoch * cfg.epochs
    if cfg.max_steps is not None:
        total_steps = min(total_steps, cfg.max_steps)
    emit({"event": "start", "fingerprint": cfg.fingerprint(), "params": model.param_count(),
          "triplets": n, "steps_per_epoch": steps_per_epoch, "total_steps": total_steps,
          "tau_mode": cfg.loss.mode, "ablate": ",".join(k for k in ("pmr", "pcr", "csm")
                                                          if getattr(cfg.model, f"ablate_{k}")) or "none"})
    losses: list[float] = []
    params = model.parameters()
    step = 0
    last_ckpt = None
    try:
        for epoch in range(cfg.epochs):
            if step >= total_steps:
                break
            order = rng.permutation(n)
            for b in range(steps_per_epoch):
                if step >= total_steps:
                    break
                batch = [augment(dataset[i], rng, aug_cfg) for i in order[b * cfg.batch : (b + 1) * cfg.batch]]
                f0, gt, f1 = stack(batch)
                frac_epoch = step / steps_per_epoch
                lr = cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min)
                with Tape() as tape:
                    result = model.forward(Tensor(f0), Tensor(f1))
                    breakdown = total_loss(result.states, Tensor(gt), frac_epoch, cfg.epochs, cfg.loss)
                    value = breakdown.value
                    if not math.isfinite(value):
                        raise NonFiniteLossError(f"non-finite loss {value} at step {step} (epoch {epoch})")
                    grads = tape.backward(breakdown.total)
                optimizer.step([grads.get(p) for p in params], lr)
                losses.append(value)
                emit({"epoch": epoch, "step": step, "lr": lr, **breakdown.as_dict()})
                step += 1
            if out is not None and ((epoch + 1) % cfg.checkpoint_every == 0 or step >= total_steps):
                last_ckpt = out / "last.pmcr"
                save_checkpoint(model, optimizer, epoch + 1, last_ckpt, step=step)
        emit({"event": "done", "steps": step, "initial_loss": losses[0], "final_loss": losses[-1]})
    finally:
        if log_file is not None:
            log_file.close()
    return TrainResult(model, optimizer, losses, lines, last_ckpt)


def blend_baseline(frame0: np.ndarray, frame1: np.ndarray) -> np.ndarray:
    return 0.5 * frame0 + 0.5 * frame1


def predict_frame(model: PMCRNet, frame0: np.ndarray, frame1: np.ndarray) -> np.ndarray:
    """Clamped middle frame for a single (3, h, w) pair."""
    result = model.forward(Tensor(frame0[None]), Tensor(frame1[None]))
    return np.clip(result.frame.data[0], 0.0, 1.0)


def evaluate(model, dataset: Sequence[Triplet], metrics: Sequence[str] = ("psnr", "ssim", "ie")) -> MetricReport:
    """Per-triplet metrics plus the linear-blend baseline.

    ``model`` is a PMCRNet or any callable ``(frame0, frame1) -> frame``.
    """
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise ValueError(f"unknown metric {unknown[0]!r}; valid names: {', '.join(METRICS)}")
    report = MetricReport(tuple(metrics))
    for t in dataset:
        if isinstance(model, PMCRNet):
            pred = predict_frame(model, t.frame0, t.frame1)
        else:
            pred = np.clip(model(t.frame0, t.frame1), 0.0, 1.0)
        report.add(t.id, pred, t.frame_gt, blend_baseline(t.frame0, t.frame1))
    return report


ABLATIONS = {
    "E1": dict(model=ModelConfig(ablate_pmr=True), loss=LossConfig(mode="off")),
    "E2": dict(model=ModelConfig(ablate_pcr=True), loss=LossConfig(mode="off")),
    "E3": dict(model=ModelConfig(ablate_csm=True), loss=LossConfig(mode="off")),
    "E4": dict(model=ModelConfig(), loss=LossConfig(mode="off")),
    "E5": dict(model=ModelConfig(), loss=LossConfig(mode="fixed")),
    "E6": dict(model=ModelConfig(), loss=LossConfig(mode="annealed")),
}


def ablation_config(name: str, base: TrainConfig | None = None) -> TrainConfig:
    if name not in ABLATIONS:
        raise ValueError(f"unknown ablation {name!r}; expected one of {', '.join(ABLATIONS)}")
    return replace(base or TrainConfig(), **ABLATIONS[name])
