"""Input checks shared by the estimator wrapper and the CLI."""

from __future__ import annotations

import numpy as np

from .metrics import METRICS


def check_frame(frame, name: str = "frame") -> np.ndarray:
    """Coerce to a float32 (3, h, w) or (n, 3, h, w) array with finite values in [0, 1]."""
    arr = np.asarray(getattr(frame, "data", frame), dtype=np.float32)
    if arr.ndim not in (3, 4) or arr.shape[-3] != 3:
        raise ValueError(f"{name} must be 3 x H x W or N x 3 x H x W, got shape {arr.shape}")
    if arr.shape[-1] < 1 or arr.shape[-2] < 1:
        raise ValueError(f"{name} is empty: shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1], got [{arr.min():.4g}, {arr.max():.4g}]")
    return arr


def check_frame_pair(frame0, frame1) -> tuple[np.ndarray, np.ndarray]:
    a, b = check_frame(frame0, "frame0"), check_frame(frame1, "frame1")
    if a.shape != b.shape:
        raise ValueError(f"frame size mismatch: {a.shape} vs {b.shape}")
    return a, b


def check_triplet_array(X) -> np.ndarray:
    """Training input as one array (n, 3, 3, h, w): frame0, ground truth, frame1."""
    arr = np.asarray(X, dtype=np.float32)
    if arr.ndim != 5 or arr.shape[1] != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected triplets shaped N x 3 x 3 x H x W, got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("no triplets given")
    check_frame(arr.reshape(-1, 3, *arr.shape[-2:]), "triplets")
    return arr


def check_pair_array(X) -> np.ndarray:
    """Prediction input as (n, 2, 3, h, w) frame pairs; a single (2, 3, h, w) pair is promoted."""
    arr = np.asarray(X, dtype=np.float32)
    if arr.ndim == 4:
        arr = arr[None]
    if arr.ndim != 5 or arr.shape[1] != 2 or arr.shape[2] != 3:
        raise ValueError(f"expected frame pairs shaped N x 2 x 3 x H x W, got {arr.shape}")
    check_frame(arr.reshape(-1, 3, *arr.shape[-2:]), "frame pairs")
    return arr


def parse_metrics(spec: str) -> tuple[str, ...]:
    names = tuple(s.strip().lower() for s in spec.split(",") if s.strip())
    if not names:
        raise ValueError(f"no metrics given; valid names: {', '.join(METRICS)}")
    bad = [n for n in names if n not in METRICS]
    if bad:
        raise ValueError(f"unknown metric {bad[0]!r}; valid names: {', '.join(METRICS)}")
    return names


def parse_size(spec: str) -> tuple[int, int]:
    """'640x480' -> (height, width) = (480, 640)."""
    try:
        w, h = (int(v) for v in spec.lower().split("x"))
    except ValueError:
        raise ValueError(f"size must look like WIDTHxHEIGHT, got {spec!r}") from None
    if w < 1 or h < 1:
        raise ValueError(f"size must be positive, got {spec!r}")
    return h, w


def check_positive_int(value: int, name: str) -> int:
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return int(value)
