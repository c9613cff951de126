"""Named invariant checks behind the ``selftest`` and ``gradcheck`` subcommands."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .gradcheck import gradcheck
from .loss import LossConfig, census_loss, charbonnier, reconstruction_loss, tau
from .metrics import interpolation_error, psnr, ssim
from .model import ModelConfig, analytic_param_count, csm_apply, PMCRNet
from .optim import AdamW, AdamWConfig, cosine_lr
from .oracles import naive_conv2d, naive_conv_transpose2d, relative_deviation
from .tensor import Tape, Tensor
from .warp import avg_downsample2x, backward_warp, build_pyramid

KERNEL_TOL = 1e-5
GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _rng(seed: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _f32(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float32)


# -- kernels -----------------------------------------------------------------


def conv_case(rng, groups: int, stride: int, padding: int):
    cg, og = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    k = int(rng.integers(1, 4))
    h, w = int(rng.integers(k, 9)), int(rng.integers(k, 9))
    x = _f32(rng.standard_normal((int(rng.integers(1, 3)), cg * groups, h, w)))
    wt = _f32(rng.standard_normal((og * groups, cg, k, k)))
    b = _f32(rng.standard_normal(og * groups))
    return x, wt, b


def conv_oracle_error(x, wt, b, stride, padding, groups) -> float:
    fast = T.conv2d(Tensor(x), Tensor(wt), Tensor(b), stride, padding, groups).data
    ref = naive_conv2d(x, wt, b, stride, padding, groups)
    mag = naive_conv2d(np.abs(x), np.abs(wt), np.abs(b), stride, padding, groups)
    return relative_deviation(fast, ref, mag)


def convt_oracle_error(x, wt, b, stride, padding, groups) -> float:
    fast = T.conv_transpose2d(Tensor(x), Tensor(wt), Tensor(b), stride, padding, groups).data
    ref = naive_conv_transpose2d(x, wt, b, stride, padding, groups)
    mag = naive_conv_transpose2d(np.abs(x), np.abs(wt), np.abs(b), stride, padding, groups)
    return relative_deviation(fast, ref, mag)


def check_conv_oracle():
    rng = _rng(1)
    worst = 0.0
    for _ in range(6):
        x, w, b = conv_case(rng, 1, 1, 1)
        worst = max(worst, conv_oracle_error(x, w, b, 1, 1, 1))
    return worst < KERNEL_TOL, f"max rel dev {worst:.2e}"


def check_grouped_conv_oracle():
    rng = _rng(2)
    worst = 0.0
    for groups in (2, 3):
        x, w, b = conv_case(rng, groups, 2, 1)
        worst = max(worst, conv_oracle_error(x, w, b, 2, 1, groups))
    return worst < KERNEL_TOL, f"max rel dev {worst:.2e}"


def check_convt_oracle():
    rng = _rng(3)
    x = _f32(rng.standard_normal((1, 4, 3, 3)))
    w = _f32(rng.standard_normal((4, 3, 4, 4)))
    err = convt_oracle_error(x, w, _f32(rng.standard_normal(6)), 2, 1, 2)
    return err < KERNEL_TOL, f"max rel dev {err:.2e}"


def check_convt_ones():
    out = T.conv_transpose2d(Tensor(_f32([[[[0.7]]]])), Tensor(np.ones((1, 1, 4, 4), np.float32))).data
    return out.shape == (1, 1, 2, 2) and bool(np.all(out == np.float32(0.7))), f"output {out.ravel().tolist()}"


def check_identity_conv():
    x = _f32(_rng(4).standard_normal((2, 6, 5, 5)))
    out = T.conv2d(Tensor(x), Tensor(np.ones((6, 1, 1, 1), np.float32)), groups=6).data
    return bool(np.array_equal(out, x)), "1x1 depthwise ones kernel"


def check_shuffle():
    x = Tensor(_f32(np.arange(4).reshape(1, 4, 1, 1)))
    got = T.channel_shuffle(x, 2).data.ravel().tolist()
    y = _f32(_rng(5).standard_normal((1, 6, 2, 2)))
    back = T.channel_shuffle(T.channel_shuffle(Tensor(y), 2), 3).data
    return got == [0, 2, 1, 3] and np.array_equal(back, y), f"[0,1,2,3] -> {got}"


def check_prelu_sigmoid():
    y = T.prelu(Tensor(_f32([-2.0, 3.0]).reshape(1, 2, 1, 1)), Tensor(_f32([0.25, 0.25]))).data.ravel()
    s = T.sigmoid(Tensor(_f32([0.0]))).data[0]
    return y.tolist() == [-0.5, 3.0] and s == 0.5, f"prelu {y.tolist()}, sigmoid(0)={s}"


def check_backward_basics():
    x = Tensor(_f32(np.arange(8)), requires_grad=True)
    with Tape() as tape:
        g = tape.backward(T.mean(x))
    y = Tensor(_f32([3.0]), requires_grad=True)
    with Tape() as tape:
        g2 = tape.backward(T.sum(T.mul(y, y)))
    ok = np.allclose(g[x], 1 / 8) and g2[y][0] == 6.0
    return ok, f"d mean = {g[x][0]}, d sum(x*x) at 3 = {g2[y][0]}"


# -- gradients ---------------------------------------------------------------


def grad_conv():
    rng = _rng(10)
    x, w = rng.standard_normal((1, 4, 6, 6)), rng.standard_normal((8, 4, 3, 3))
    err = gradcheck(lambda a, b: T.conv2d(a, b, padding=1), [x, w])
    return err < 1e-5, f"rel err {err:.2e}"


def grad_grouped_conv():
    rng = _rng(11)
    x, w, b = rng.standard_normal((2, 6, 5, 5)), rng.standard_normal((6, 2, 3, 3)), rng.standard_normal(6)
    err = gradcheck(lambda a, k, c: T.conv2d(a, k, c, stride=2, padding=1, groups=3), [x, w, b])
    return err < GRAD_TOL, f"rel err {err:.2e}"


def grad_convt():
    rng = _rng(12)
    x, w, b = rng.standard_normal((1, 4, 3, 3)), rng.standard_normal((4, 3, 4, 4)), rng.standard_normal(6)
    err = gradcheck(lambda a, k, c: T.conv_transpose2d(a, k, c, groups=2), [x, w, b])
    return err < GRAD_TOL, f"rel err {err:.2e}"


def kink_free(rng, shape, margin: float = 0.1) -> np.ndarray:
    """Values with |v| >= margin, so no PReLU kink lies within a small step."""
    v = rng.uniform(margin, 1.0, size=shape)
    return v * rng.choice([-1.0, 1.0], size=shape)


def grad_prelu_shuffle():
    rng = _rng(13)
    x, s = kink_free(rng, (2, 6, 3, 3)), rng.uniform(0.1, 0.4, 6)
    err_p = gradcheck(lambda a, b: T.prelu(a, b), [x, s])
    err_s = gradcheck(lambda a: T.channel_shuffle(a, 3), [x])
    return err_p < 1e-6 and err_s < 1e-9, f"prelu {err_p:.2e}, shuffle {err_s:.2e}"


def off_lattice_flow(rng, shape, lo: float = -2.5, hi: float = 2.5, margin: float = 0.05) -> np.ndarray:
    """Flow whose fractional parts stay at least ``margin`` from integers."""
    whole = rng.integers(int(np.floor(lo)), int(np.ceil(hi)), size=shape)
    return whole + rng.uniform(margin, 1 - margin, size=shape)


def grad_warp():
    rng = _rng(14)
    x, flow = rng.standard_normal((1, 2, 6, 7)), off_lattice_flow(rng, (1, 2, 6, 7))
    # keep the sample points inside the frame so the border clamp stays inactive
    gy, gx = np.mgrid[0:6, 0:7]
    flow[:, 0] = np.clip(gx + flow[:, 0], 0.05, 5.95) - gx
    flow[:, 1] = np.clip(gy + flow[:, 1], 0.05, 4.95) - gy
    flow = np.floor(flow) + np.clip(flow - np.floor(flow), 0.05, 0.95)
    err = gradcheck(backward_warp, [x, flow])
    return err < GRAD_TOL, f"rel err {err:.2e}"


def grad_elementwise():
    rng = _rng(15)
    a, b, m = rng.standard_normal((1, 3, 4, 4)), rng.standard_normal((1, 3, 4, 4)), rng.uniform(0.1, 0.9, (1, 1, 4, 4))
    errs = [
        gradcheck(lambda p, q: T.div(T.mul(p, q), T.add(T.square(q), 1.0)), [a, b]),
        gradcheck(lambda p: T.sigmoid(p), [a]),
        gradcheck(T.blend, [m, a, b]),
        gradcheck(avg_downsample2x, [a]),
        gradcheck(lambda p, q: T.concat([p, q]), [a, b]),
    ]
    return max(errs) < GRAD_TOL, f"max rel err {max(errs):.2e}"


def census_lattice(rng, shape) -> np.ndarray:
    """Image whose 7x7 neighbourhoods never hold near-equal intensities.

    Each pixel draws a distinct level (spacing 0.1 per channel, i.e. 25.5 grey
    levels) from a permuted 7x7 tile, shared by all channels, plus small jitter.
    Values run past 1, which is harmless for a gradient probe.
    """
    n, c, h, w = shape
    perm = rng.permutation(49)
    yy, xx = np.mgrid[0:h, 0:w]
    base = perm[(yy % 7) * 7 + xx % 7] * 0.1
    img = np.repeat(np.repeat(base[None, None], c, axis=1), n, axis=0)
    return img + rng.uniform(-0.005, 0.005, size=shape)


def grad_losses():
    rng = _rng(16)
    gt = census_lattice(rng, (1, 3, 9, 9))
    pred = census_lattice(rng, (1, 3, 9, 9))
    sign = rng.choice([-1.0, 1.0], size=gt.shape)
    far = gt + sign * rng.uniform(0.05, 0.3, size=gt.shape)
    e_c = gradcheck(lambda p: charbonnier(T.sub(p, Tensor(gt))), [far])
    e_cen = gradcheck(lambda p: census_loss(p, Tensor(gt)), [pred])
    return max(e_c, e_cen) < GRAD_TOL, f"charbonnier {e_c:.2e}, census {e_cen:.2e}"


# -- warp / csm / loss / schedule / metrics ----------------------------------


def check_warp_identity():
    x = _f32(_rng(20).random((1, 3, 5, 6)))
    out = backward_warp(Tensor(x), Tensor(np.zeros((1, 2, 5, 6), np.float32))).data
    return bool(np.array_equal(out, x)), "zero flow reproduces input bitwise"


def check_warp_shift():
    x = _f32(_rng(21).random((1, 1, 4, 5)))
    flow = np.zeros((1, 2, 4, 5), np.float32)
    flow[:, 0] = 2.0
    out = backward_warp(Tensor(x), Tensor(flow)).data
    expected = x[..., np.minimum(np.arange(5) + 2, 4)]
    return bool(np.array_equal(out, expected)), "integer flow = clamped shift"


def check_warp_half():
    x = _f32(_rng(22).random((1, 1, 3, 4)))
    flow = np.zeros((1, 2, 3, 4), np.float32)
    flow[:, 0] = 0.5
    out = backward_warp(Tensor(x), Tensor(flow)).data[..., :3]
    expected = 0.5 * (x[..., :3] + x[..., 1:])
    err = float(np.abs(out - expected).max())
    return err <= 1e-6, f"max err {err:.1e}"


def check_pyramid():
    p = build_pyramid(Tensor(np.zeros((1, 3, 64, 96), np.float32)), 4)
    shapes = [t.shape[2:] for t in p]
    return shapes == [(64, 96), (32, 48), (16, 24), (8, 12)], f"{shapes}"


def _csm_inputs(seed):
    rng = _rng(seed)
    i0, i1 = _f32(rng.random((1, 3, 4, 5))), _f32(rng.random((1, 3, 4, 5)))
    flow0 = _f32(off_lattice_flow(rng, (1, 2, 4, 5), -1, 1))
    flow1 = _f32(off_lattice_flow(rng, (1, 2, 4, 5), -1, 1))
    return i0, i1, flow0, flow1


def check_csm_mask_one():
    i0, i1, f0, f1 = _csm_inputs(23)
    zeros = Tensor(np.zeros_like(i0))
    out = csm_apply(Tensor(np.ones((1, 1, 4, 5), np.float32)), zeros, Tensor(f0), Tensor(f1), Tensor(i0), Tensor(i1))
    warped = backward_warp(Tensor(i0), Tensor(f0)).data
    return bool(np.array_equal(out.data, warped)), "M=1 gives warped frame 0"


def check_csm_mask_zero():
    i0, i1, f0, f1 = _csm_inputs(24)
    zeros = Tensor(np.zeros_like(i0))
    out = csm_apply(Tensor(np.zeros((1, 1, 4, 5), np.float32)), zeros, Tensor(f0), Tensor(f1), Tensor(i0), Tensor(i1))
    warped = backward_warp(Tensor(i1), Tensor(f1)).data
    return bool(np.array_equal(out.data, warped)), "M=0 gives warped frame 1"


def check_csm_static():
    rng = _rng(25)
    img = _f32(rng.random((1, 3, 4, 5)))
    mask = Tensor(_f32(rng.random((1, 1, 4, 5))))
    zero_flow = Tensor(np.zeros((1, 2, 4, 5), np.float32))
    out = csm_apply(mask, Tensor(np.zeros_like(img)), zero_flow, zero_flow, Tensor(img), Tensor(img))
    return bool(np.array_equal(out.data, img)), "I0 == I1, zero flow, R = 0 reproduces the input"


def check_loss_floors():
    x = Tensor(_f32(_rng(26).random((1, 3, 12, 12))))
    c = charbonnier(T.sub(x, x)).item()
    r = reconstruction_loss(x, x).item()
    ok = c == np.float32(1e-3) and r == np.float32(2e-3)
    return ok, f"charbonnier(0)={c!r}, L_r(x,x)={r!r}"


def check_census_shift():
    # dyadic values keep the shifted intensities exact
    rng = _rng(27)
    a = _f32(rng.integers(0, 128, (1, 3, 10, 10)) / 256.0)
    shifted = _f32(a + 0.25)
    base = census_loss(Tensor(a), Tensor(a)).item()
    moved = census_loss(Tensor(a), Tensor(shifted)).item()
    return base == moved, f"census(a,a)={base!r}, census(a,a+0.25)={moved!r}"


def check_tau():
    cfg = LossConfig()
    vals = (tau(0, 300, cfg), tau(75, 300, cfg), tau(300, 300, cfg), tau(37.5, 300, cfg))
    ok = vals[0] == 0.1 and vals[1] == 0.0 and vals[2] == 0.0 and abs(vals[3] - 0.05) < 1e-15
    return ok, f"tau(0,75,300,37.5)={vals}"


def check_cosine():
    vals = (cosine_lr(0, 100), cosine_lr(50, 100), cosine_lr(100, 100))
    ok = abs(vals[0] - 1e-4) < 1e-18 and abs(vals[1] - 6e-5) < 1e-18 and abs(vals[2] - 2e-5) < 1e-18
    return ok, f"lr(0,50,100)={vals}"


def check_adamw():
    p = Tensor(np.zeros(1))
    opt = AdamW([("p", p)], AdamWConfig(weight_decay=0.0))
    opt.step([np.ones(1)], 1e-3)
    q = Tensor(np.ones(1))
    opt2 = AdamW([("q", q)], AdamWConfig(weight_decay=0.1))
    opt2.step([np.zeros(1)], 1e-2)
    ok = abs(p.data[0] + 1e-3) < 1e-9 and abs(q.data[0] - (1 - 1e-3)) < 1e-12
    return ok, f"unit step {p.data[0]:.6g}, pure decay {q.data[0]:.6g}"


def check_metrics():
    gt = np.full((3, 16, 16), 0.5)
    p = psnr(gt + 0.1, gt)
    ie = interpolation_error(gt + 2 / 255, gt)
    s = ssim(gt, gt)
    ok = abs(p - 20.0) < 1e-6 and abs(ie - 2.0) < 1e-9 and s == 1.0
    return ok, f"psnr {p:.9f}, ie {ie:.12f}, ssim {s}"


def check_param_count():
    cfg = ModelConfig()
    model = PMCRNet(cfg)
    n, analytic = model.param_count(), analytic_param_count(cfg)
    ok = n == analytic and abs(n - 6.2e6) / 6.2e6 < 0.15
    return ok, f"{n} params (closed form {analytic}, {100 * (n / 6.2e6 - 1):+.1f}% vs 6.2M)"


SELFTEST_CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("conv2d_vs_oracle", check_conv_oracle),
    ("grouped_conv_vs_oracle", check_grouped_conv_oracle),
    ("conv_transpose_vs_oracle", check_convt_oracle),
    ("conv_transpose_ones", check_convt_ones),
    ("identity_depthwise_conv", check_identity_conv),
    ("channel_shuffle", check_shuffle),
    ("prelu_sigmoid_values", check_prelu_sigmoid),
    ("backward_basics", check_backward_basics),
    ("warp_zero_flow_identity", check_warp_identity),
    ("warp_integer_shift", check_warp_shift),
    ("warp_half_pixel", check_warp_half),
    ("pyramid_sizes", check_pyramid),
    ("csm_mask_one", check_csm_mask_one),
    ("csm_mask_zero", check_csm_mask_zero),
    ("csm_static_scene", check_csm_static),
    ("loss_floors", check_loss_floors),
    ("census_brightness_invariance", check_census_shift),
    ("tau_schedule", check_tau),
    ("cosine_lr", check_cosine),
    ("adamw_step", check_adamw),
    ("metric_oracles", check_metrics),
    ("param_calibration", check_param_count),
    ("grad_conv2d", grad_conv),
    ("grad_prelu_shuffle", grad_prelu_shuffle),
    ("grad_warp", grad_warp),
]

GRADCHECK_CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("grad_conv2d", grad_conv),
    ("grad_grouped_conv2d", grad_grouped_conv),
    ("grad_conv_transpose2d", grad_convt),
    ("grad_prelu_shuffle", grad_prelu_shuffle),
    ("grad_warp", grad_warp),
    ("grad_elementwise", grad_elementwise),
    ("grad_losses", grad_losses),
]


def smooth_frames(n: int = 2, size: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Low-frequency test frames; smooth content keeps finite differences accurate."""
    yy, xx = np.mgrid[0:size, 0:size] / size

    def frame(phase):
        return np.stack([
            np.stack([0.5 + 0.3 * np.sin(2 * np.pi * (xx * (1 + c) + yy * (2 - c) * 0.5) + phase + b) for c in range(3)])
            for b in range(n)
        ])

    return frame(0.0), frame(0.7)


def end_to_end_gradcheck(entries: int = 1, seed: int = 0, size: int = 32, config: ModelConfig | None = None) -> dict[str, float]:
    """Relative error per parameter tensor for the full model loss (double precision).

    The ground truth sits 0.05..0.3 away from the initial prediction in every
    element so the Charbonnier term is far from its curved minimum, and steps
    that straddle a PReLU or bilinear kink are shrunk.
    """
    from .loss import total_loss

    rng = _rng(seed)
    i0, i1 = smooth_frames(2, size)
    with T.double_precision():
        model = PMCRNet(config or ModelConfig(), seed=seed + 1).astype(np.float64)
        base = model.forward(Tensor(i0), Tensor(i1)).frame.data
    sign = rng.choice([-1.0, 1.0], size=base.shape)
    gt = base + sign * rng.uniform(0.05, 0.3, size=base.shape)
    names = [n for n, _ in model.named_parameters()]
    values = [p.data.copy() for _, p in model.named_parameters()]
    errors = {}
    for k, name in enumerate(names):
        def loss_of(x, k=k):
            tensors = [Tensor(v) for v in values]
            tensors[k] = x
            model.set_parameters(tensors)
            r = model.forward(Tensor(i0), Tensor(i1))
            return total_loss(r.states, Tensor(gt), 0.0, 4).total

        errors[name] = gradcheck(loss_of, [values[k]], seed=seed + k, max_entries=entries, kink_safe=True)
    model.set_parameters([Tensor(v) for v in values])
    return errors


def grad_end_to_end():
    errs = end_to_end_gradcheck()
    worst = max(errs, key=errs.get)
    return errs[worst] < GRAD_TOL, f"{len(errs)} tensors, worst {worst} {errs[worst]:.2e}"


def run_checks(checks, fault: str | None = None) -> list[CheckResult]:
    results = []
    for name, fn in checks:
        start = time.perf_counter()
        try:
            if fault:
                with T.inject_fault(fault):
                    ok, detail = fn()
            else:
                ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - start))
    return results


def format_table(results: list[CheckResult]) -> list[str]:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  time    detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:5.2f}s  {r.detail}")
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return lines
