"""Slow reference kernels used to validate the fast ones."""

from __future__ import annotations

import numpy as np


def naive_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None, stride: int = 1,
                 padding: int = 0, groups: int = 1) -> np.ndarray:
    """Direct nested-loop cross-correlation in float64."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, c, h, wd = x.shape
    oc, cg, kh, kw = w.shape
    og = oc // groups
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, oc, oh, ow))
    for bi in range(n):
        for o in range(oc):
            g = o // og
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ci in range(cg):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[bi, g * cg + ci, i * stride + u, j * stride + v] * w[o, ci, u, v]
                    out[bi, o, i, j] = acc + (0.0 if b is None else b[o])
    return out


def conv_matrix(in_shape: tuple[int, int, int], w: np.ndarray, stride: int, padding: int,
                groups: int = 1) -> np.ndarray:
    """Dense matrix A with conv2d(x) == A @ x.ravel() for a single (c, h, w) image."""
    size = int(np.prod(in_shape))
    cols = []
    for k in range(size):
        e = np.zeros(size)
        e[k] = 1.0
        cols.append(naive_conv2d(e.reshape((1,) + tuple(in_shape)), w, None, stride, padding, groups).ravel())
    return np.stack(cols, axis=1)


def naive_conv_transpose2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None, stride: int = 2,
                           padding: int = 1, groups: int = 1) -> np.ndarray:
    """Transposed convolution as the explicit transpose of the conv2d matrix.

    ``w`` has layout (in, out/groups, k, k); viewed as a conv2d kernel it maps
    the (out)-channel image back to the (in)-channel one.
    """
    x = np.asarray(x, dtype=np.float64)
    n, ic, h, wd = x.shape
    _, og, kh, kw = w.shape
    oc = og * groups
    oh = (h - 1) * stride - 2 * padding + kh
    ow = (wd - 1) * stride - 2 * padding + kw
    a = conv_matrix((oc, oh, ow), w, stride, padding, groups)
    out = np.stack([(a.T @ x[i].ravel()).reshape(oc, oh, ow) for i in range(n)])
    if b is not None:
        out = out + np.asarray(b, dtype=np.float64).reshape(1, oc, 1, 1)
    return out


def relative_deviation(fast: np.ndarray, ref: np.ndarray, magnitude: np.ndarray) -> float:
    """Max |fast - ref| / magnitude, with ``magnitude`` the same op applied to |inputs|.

    The sum of absolute products bounds the rounding error of any summation
    order, so this ratio is meaningful even where the output cancels to ~0.
    """
    fast = np.asarray(fast, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    mag = np.maximum(np.asarray(magnitude, dtype=np.float64), 1e-30)
    return float((np.abs(fast - ref) / mag).max(initial=0.0))
