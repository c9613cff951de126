"""scikit-learn style wrapper: ``fit`` trains, ``predict`` interpolates, ``score`` is mean PSNR."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Triplet
from .loss import LossConfig
from .metrics import psnr
from .model import ModelConfig, PMCRNet
from .training import TrainConfig, predict_frame, train
from .validation import check_pair_array, check_triplet_array


class FrameInterpolator(BaseEstimator):
    """Middle-frame interpolator.

    ``fit(X)`` takes triplets shaped (n, 3, 3, h, w) ordered frame0, ground
    truth, frame1. ``predict(X)`` takes pairs shaped (n, 2, 3, h, w) and returns
    (n, 3, h, w) frames clamped to [0, 1].
    """

    def __init__(self, hidden_width=288, groups=3, ablate=(), tau_mode="annealed", epochs=300, batch=16,
                 lr_max=1e-4, lr_min=2e-5, weight_decay=1e-4, crop=256, max_steps=None, seed=0):
        self.hidden_width = hidden_width
        self.groups = groups
        self.ablate = ablate
        self.tau_mode = tau_mode
        self.epochs = epochs
        self.batch = batch
        self.lr_max = lr_max
        self.lr_min = lr_min
        self.weight_decay = weight_decay
        self.crop = crop
        self.max_steps = max_steps
        self.seed = seed

    def _model_config(self) -> ModelConfig:
        flags = set(self.ablate)
        unknown = flags - {"pmr", "pcr", "csm"}
        if unknown:
            raise ValueError(f"unknown ablation {sorted(unknown)[0]!r}; expected pmr, pcr or csm")
        return ModelConfig(self.hidden_width, self.groups, "pmr" in flags, "pcr" in flags, "csm" in flags)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch=self.batch, lr_max=self.lr_max, lr_min=self.lr_min,
                           weight_decay=self.weight_decay, seed=self.seed, crop=self.crop, max_steps=self.max_steps,
                           loss=LossConfig(mode=self.tau_mode), model=self._model_config())

    def fit(self, X, y=None):
        arr = check_triplet_array(X)
        cfg = self._train_config()
        triplets = [Triplet(t[0], t[1], t[2], str(i)) for i, t in enumerate(arr)]
        result = train(cfg, triplets)
        self.model_ = result.model
        self.optimizer_ = result.optimizer
        self.loss_curve_ = list(result.losses)
        self.n_params_ = result.model.param_count()
        return self

    def _check_fitted(self) -> PMCRNet:
        model = getattr(self, "model_", None)
        if model is None:
            raise NotFittedError("FrameInterpolator is not fitted; call fit or load first")
        return model

    def predict(self, X) -> np.ndarray:
        model = self._check_fitted()
        pairs = check_pair_array(X)
        return np.stack([predict_frame(model, p[0], p[1]) for p in pairs])

    def score(self, X, y) -> float:
        """Mean PSNR of ``predict(X)`` against ground-truth frames ``y``."""
        pred = self.predict(X)
        gt = np.asarray(y, dtype=np.float32).reshape(pred.shape)
        return float(np.mean([psnr(p, g) for p, g in zip(pred, gt)]))

    def save(self, path) -> None:
        save_checkpoint(self._check_fitted(), getattr(self, "optimizer_", None), self.epochs, path)

    @classmethod
    def load(cls, path) -> "FrameInterpolator":
        model, optimizer, _ = load_checkpoint(path)
        cfg = model.config
        ablate = tuple(k for k in ("pmr", "pcr", "csm") if getattr(cfg, f"ablate_{k}"))
        est = cls(hidden_width=cfg.hidden_width, groups=cfg.groups, ablate=ablate)
        est.model_, est.optimizer_ = model, optimizer
        est.n_params_ = model.param_count()
        return est
