"""Central finite-difference checks of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, double_precision, mul, sum as tsum, track_kinks


def relative_error(analytic: np.ndarray, numeric: np.ndarray, scale: float = 0.0) -> float:
    """Max absolute deviation scaled by the larger gradient magnitude.

    Scaling by the tensor-wide magnitude (not per element) keeps entries whose
    true gradient is ~0 from dominating the score.
    """
    scale = max(scale, np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    seed: int = 0,
    step: float = 1e-3,
    max_entries: int | None = None,
    kink_safe: bool = False,
    min_step: float = 1e-9,
) -> float:
    """Compare tape gradients of ``fn`` with central differences in float64.

    Non-scalar outputs are reduced with a fixed random projection. With
    ``max_entries`` only that many randomly chosen coordinates per input are
    perturbed. Returns the max relative error over all inputs; never raises on
    a large error.

    With ``kink_safe`` the step for a coordinate is divided by 10 (down to
    ``min_step``) while the +step and -step evaluations fall on different
    branches of a PReLU or a bilinear cell, since a difference quotient across
    a kink does not estimate the derivative.
    """
    rng = np.random.default_rng(seed)
    with double_precision():
        arrays = [np.array(a, dtype=np.float64) for a in inputs]
        probe = fn(*[Tensor(a) for a in arrays])
        weights = rng.standard_normal(probe.shape) if probe.size > 1 else np.ones(probe.shape)

        def scalar(*xs: Tensor) -> Tensor:
            out = fn(*xs)
            return out if out.size == 1 else tsum(mul(out, Tensor(weights)))

        leaves = [Tensor(a, requires_grad=True) for a in arrays]
        with Tape() as tape:
            loss = scalar(*leaves)
            grads = tape.backward(loss)

        worst = 0.0
        for k, arr in enumerate(arrays):
            analytic = grads.get(leaves[k])
            analytic = np.zeros_like(arr) if analytic is None else analytic.reshape(arr.shape)
            flat = arr.reshape(-1)
            idx = np.arange(flat.size)
            if max_entries is not None and flat.size > max_entries:
                idx = rng.choice(flat.size, size=max_entries, replace=False)
            numeric = np.empty(idx.size)
            for j, i in enumerate(idx):
                orig = flat[i]
                h = step
                while True:
                    with track_kinks() as plus_branches:
                        flat[i] = orig + h
                        plus = scalar(*[Tensor(a) for a in arrays]).item()
                    with track_kinks() as minus_branches:
                        flat[i] = orig - h
                        minus = scalar(*[Tensor(a) for a in arrays]).item()
                    flat[i] = orig
                    if not kink_safe or plus_branches == minus_branches or h / 10 < min_step:
                        break
                    h /= 10
                numeric[j] = (plus - minus) / (2 * h)
            # sampled entries are still scaled by the whole tensor's gradient magnitude
            full = float(np.abs(analytic).max(initial=0.0))
            worst = max(worst, relative_error(analytic.reshape(-1)[idx], numeric, full))
    return worst
