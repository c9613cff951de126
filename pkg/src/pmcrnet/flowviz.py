"""Optical-flow colour-wheel rendering and raw planar dumps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

# hue segment lengths of the Middlebury wheel: red-yellow, yellow-green, green-cyan,
# cyan-blue, blue-magenta, magenta-red
_SEGMENTS = (15, 6, 4, 11, 13, 6)


def color_wheel() -> np.ndarray:
    """(55, 3) table of wheel colours in 0..255."""
    ry, yg, gc, cb, bm, mr = _SEGMENTS
    rows = []
    ramp = lambda n: np.floor(255 * np.arange(n) / n)  # noqa: E731
    full = lambda n: np.full(n, 255.0)  # noqa: E731
    zero = lambda n: np.zeros(n)  # noqa: E731
    rows.append(np.stack([full(ry), ramp(ry), zero(ry)], 1))
    rows.append(np.stack([255 - ramp(yg), full(yg), zero(yg)], 1))
    rows.append(np.stack([zero(gc), full(gc), ramp(gc)], 1))
    rows.append(np.stack([zero(cb), 255 - ramp(cb), full(cb)], 1))
    rows.append(np.stack([ramp(bm), zero(bm), full(bm)], 1))
    rows.append(np.stack([full(mr), zero(mr), 255 - ramp(mr)], 1))
    return np.concatenate(rows)


def flow_to_color(flow: np.ndarray, max_radius: float | None = None) -> np.ndarray:
    """(2, h, w) flow (x then y) -> (3, h, w) image in [0, 1].

    Hue encodes direction, saturation the magnitude relative to ``max_radius``
    (default: the largest magnitude present).
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise ValueError(f"flow must be 2 x H x W, got {flow.shape}")
    u, v = flow
    rad = np.sqrt(u**2 + v**2)
    if max_radius is None:
        max_radius = rad.max()
    if max_radius > 0:
        u, v, rad = u / max_radius, v / max_radius, rad / max_radius
    wheel = color_wheel()
    ncols = len(wheel)
    angle = np.arctan2(-v, -u) / np.pi
    fk = (angle + 1) / 2 * (ncols - 1)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % ncols
    f = fk - k0
    out = np.empty((3,) + u.shape)
    for c in range(3):
        col = ((1 - f) * wheel[k0, c] + f * wheel[k1, c]) / 255.0
        inside = rad <= 1
        col = np.where(inside, 1 - rad * (1 - col), col * 0.75)
        out[c] = col
    return out


def write_flow_f32(flow: np.ndarray, path) -> None:
    """Raw little-endian float32, planar (all x components, then all y)."""
    Path(path).write_bytes(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def read_flow_f32(path, height: int, width: int) -> np.ndarray:
    return np.frombuffer(Path(path).read_bytes(), dtype="<f4").reshape(2, height, width)
