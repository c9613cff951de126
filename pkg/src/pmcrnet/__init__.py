"""Progressive motion and context refinement network for video frame interpolation, on a NumPy autodiff core."""

from .checkpoint import load_checkpoint, save_checkpoint
from .estimator import FrameInterpolator
from .loss import LossConfig, total_loss
from .model import ModelConfig, PMCRNet
from .tensor import Tape, Tensor
from .training import TrainConfig, evaluate, train

__all__ = [
    "FrameInterpolator",
    "LossConfig",
    "ModelConfig",
    "PMCRNet",
    "Tape",
    "Tensor",
    "TrainConfig",
    "evaluate",
    "load_checkpoint",
    "save_checkpoint",
    "total_loss",
    "train",
]
