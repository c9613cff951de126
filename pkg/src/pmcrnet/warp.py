"""Bilinear backward warping, 2x average downsampling and image pyramids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, gather_spatial, index_basic, note_kinks, record_op


def _check_flow(x: Tensor, flow: Tensor) -> None:
    if x.ndim != 4 or flow.ndim != 4:
        raise ValueError(f"backward_warp expects NCHW tensors, got {x.shape} and {flow.shape}")
    if flow.shape[1] != 2:
        raise ValueError(f"flow must have 2 channels, got {flow.shape[1]}")
    if (x.shape[0], x.shape[2], x.shape[3]) != (flow.shape[0], flow.shape[2], flow.shape[3]):
        raise ValueError(f"spatial mismatch between image {x.shape} and flow {flow.shape}")


def backward_warp(x: Tensor, flow: Tensor) -> Tensor:
    """Sample ``x`` at ``p + flow(p)`` bilinearly, clamping coordinates to the border.

    Flow channel 0 is the horizontal displacement (+x right), channel 1 the
    vertical one (+y down), both in pixels.
    """
    _check_flow(x, flow)
    n, c, h, w = x.shape
    dtype = x.dtype
    fd = flow.data
    grid_y, grid_x = np.mgrid[0:h, 0:w]
    sx_raw = grid_x + fd[:, 0]
    sy_raw = grid_y + fd[:, 1]
    sx = np.clip(sx_raw, 0, w - 1)
    sy = np.clip(sy_raw, 0, h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    note_kinks(x0, y0, sx_raw >= 0, sx_raw <= w - 1, sy_raw >= 0, sy_raw <= h - 1)
    wx = (sx - x0).astype(dtype)[:, None]
    wy = (sy - y0).astype(dtype)[:, None]

    flat = x.data.reshape(n, c, h * w)
    corners = [(y0 * w + x0), (y0 * w + x1), (y1 * w + x0), (y1 * w + x1)]
    corners = [ix.reshape(n, 1, h * w) for ix in corners]
    va, vb, vc, vd = (np.take_along_axis(flat, ix, axis=2).reshape(n, c, h, w) for ix in corners)
    top = (1 - wx) * va + wx * vb
    bottom = (1 - wx) * vc + wx * vd
    out = (1 - wy) * top + wy * bottom

    inside_x = ((sx_raw >= 0) & (sx_raw <= w - 1))[:, None]
    inside_y = ((sy_raw >= 0) & (sy_raw <= h - 1))[:, None]

    def grad(g):
        base = (np.arange(n * c).reshape(n, c, 1) * (h * w))
        gx = np.zeros(n * c * h * w)
        weights = [(1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx]
        for ix, wt in zip(corners, weights):
            gx += np.bincount((base + ix).reshape(-1), weights=(g * wt).reshape(-1), minlength=n * c * h * w)
        d_sx = (1 - wy) * (vb - va) + wy * (vd - vc)
        d_sy = bottom - top
        gflow = np.concatenate(
            [
                (g * d_sx * inside_x).sum(axis=1, keepdims=True),
                (g * d_sy * inside_y).sum(axis=1, keepdims=True),
            ],
            axis=1,
        )
        return gx.reshape(n, c, h, w).astype(dtype), gflow.astype(flow.dtype)

    return record_op(out.astype(dtype, copy=False), (x, flow), grad)


def avg_downsample2x(x: Tensor) -> Tensor:
    """Mean of each 2x2 block (pairwise sums, so constant images stay exact)."""
    if x.ndim != 4:
        raise ValueError(f"avg_downsample2x expects NCHW, got {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"avg_downsample2x needs even spatial dims, got {h}x{w}")
    xd = x.data
    out = ((xd[:, :, 0::2, 0::2] + xd[:, :, 0::2, 1::2]) + (xd[:, :, 1::2, 0::2] + xd[:, :, 1::2, 1::2])) * 0.25

    def grad(g):
        q = g * 0.25
        return (np.repeat(np.repeat(q, 2, axis=2), 2, axis=3),)

    return record_op(out.astype(x.dtype, copy=False), (x,), grad)


def build_pyramid(image: Tensor, levels: int = 4) -> list[Tensor]:
    """[I^0, ..., I^{levels-1}] with level l at 1/2^l resolution."""
    factor = 2 ** (levels - 1)
    h, w = image.shape[2:]
    if h % factor or w % factor:
        raise ValueError(f"pyramid of {levels} levels needs dims divisible by {factor}, got {h}x{w}")
    pyramid = [image]
    for _ in range(levels - 1):
        pyramid.append(avg_downsample2x(pyramid[-1]))
    return pyramid


@dataclass(frozen=True)
class CropRecord:
    height: int
    width: int
    padded_height: int
    padded_width: int


def _reflect_indices(size: int, target: int) -> np.ndarray:
    idx = np.arange(target)
    if size == 1:
        return np.zeros(target, dtype=np.intp)
    period = 2 * (size - 1)
    idx = idx % period
    return np.where(idx < size, idx, period - idx)


def pad_to_multiple(image: Tensor, multiple: int = 16) -> tuple[Tensor, CropRecord]:
    """Reflection-pad right/bottom so both dims become multiples of ``multiple``."""
    h, w = image.shape[2:]
    ph = -(-h // multiple) * multiple
    pw = -(-w // multiple) * multiple
    record = CropRecord(h, w, ph, pw)
    if (ph, pw) == (h, w):
        return image, record
    return gather_spatial(image, _reflect_indices(h, ph), _reflect_indices(w, pw)), record


def crop_back(x: Tensor, record: CropRecord) -> Tensor:
    if x.shape[2:] == (record.height, record.width):
        return x
    return index_basic(x, (slice(None), slice(None), slice(0, record.height), slice(0, record.width)))
