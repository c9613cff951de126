"""Command-line entry point: interpolate, train, eval, bench, gradcheck, selftest.

Exit codes: 0 success, 1 invalid arguments or data, 2 I/O failure,
3 a failed selftest or gradcheck.
"""

from __future__ import annotations

import argparse
import resource
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_CHECK = 0, 1, 2, 3
REFERENCE_GPU_SECONDS = 0.016


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _out(line: str) -> None:
    print(line, flush=True)


# -- interpolate ---------------------------------------------------------------


def cmd_interpolate(args) -> int:
    from .checkpoint import load_checkpoint
    from .data import load_image, save_image
    from .flowviz import flow_to_color, write_flow_f32
    from .tensor import Tensor
    from .validation import check_frame_pair
    from .warp import crop_back

    frame0, frame1 = load_image(args.frame0), load_image(args.frame1)
    if frame0.shape != frame1.shape:
        raise ValueError(f"frame size mismatch: {args.frame0} is {frame0.shape[1]}x{frame0.shape[2]}, "
                         f"{args.frame1} is {frame1.shape[1]}x{frame1.shape[2]}")
    check_frame_pair(frame0, frame1)
    model, _, _ = load_checkpoint(args.weights)
    result = model.forward(Tensor(frame0[None]), Tensor(frame1[None]))
    frame = np.clip(result.frame.data[0], 0.0, 1.0)
    if not np.all(np.isfinite(frame)):
        raise ValueError("model produced non-finite output")
    out = Path(args.out)
    save_image(frame, out)
    _out(f"wrote={out} size={frame.shape[2]}x{frame.shape[1]}")
    state0 = result.states[0]
    if args.dump_flow:
        folder = Path(args.dump_flow)
        folder.mkdir(parents=True, exist_ok=True)
        for name, flow in (("flow_t0", state0.flow_t0), ("flow_t1", state0.flow_t1)):
            field = crop_back(flow, result.crop).data[0]
            save_image(flow_to_color(field), folder / f"{name}.png")
            write_flow_f32(field, folder / f"{name}.f32")
        _out(f"flow_dir={folder} files=flow_t0.png,flow_t0.f32,flow_t1.png,flow_t1.f32")
    if args.dump_levels:
        folder = Path(args.dump_levels)
        folder.mkdir(parents=True, exist_ok=True)
        for level, state in sorted(result.states.items()):
            save_image(np.clip(state.frame.data[0], 0.0, 1.0), folder / f"level{level}.png")
        _out(f"levels_dir={folder} levels={len(result.states)}")
    return EXIT_OK


# -- train -------------------------------------------------------------------


def _train_config(args):
    from .loss import LossConfig
    from .model import ModelConfig
    from .training import TrainConfig, toy_config

    flags = set(args.ablate or ())
    model_cfg = ModelConfig(ablate_pmr="pmr" in flags, ablate_pcr="pcr" in flags, ablate_csm="csm" in flags)
    overrides = {k: v for k, v in (("epochs", args.epochs), ("batch", args.batch), ("lr_max", args.lr_max),
                                   ("lr_min", args.lr_min), ("max_steps", args.max_steps), ("crop", args.crop))
                 if v is not None}
    common = dict(seed=args.seed, loss=LossConfig(mode=args.tau), model=model_cfg)
    if args.toy:
        return toy_config(**common, **overrides)
    return TrainConfig(**common, **overrides)


def cmd_train(args) -> int:
    from .data import load_triplet, scan_dataset
    from .training import evaluate, toy_dataset, train

    cfg = _train_config(args)
    refs = scan_dataset(args.data, args.list)
    if not refs:
        raise ValueError(f"list file {args.list} names no sequences")
    if args.toy:
        dataset = toy_dataset([load_triplet(r) for r in refs[:4]])
    else:
        dataset = [load_triplet(r) for r in refs]
    result = train(cfg, dataset, args.out, log=_out)
    _out(f"checkpoint={result.checkpoint}")
    if args.toy:
        report = evaluate(result.model, dataset, ("psnr",))
        _out(f"toy_eval psnr={report.mean['psnr']!r} blend_psnr={report.baseline_mean['psnr']!r} "
             f"loss_ratio={result.losses[-1] / result.losses[0]!r}")
    return EXIT_OK


# -- eval --------------------------------------------------------------------


def cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .data import load_triplet, scan_dataset
    from .training import evaluate
    from .validation import parse_metrics

    metrics = parse_metrics(args.metrics)
    if args.gt_as_pred:
        refs = scan_dataset(args.data, args.list)
        triplets = [load_triplet(r) for r in refs]
        lookup = {id(t.frame0): t.frame_gt for t in triplets}
        model = lambda f0, f1: lookup[id(f0)]  # noqa: E731
    else:
        if not args.weights:
            raise ValueError("--weights is required unless --gt-as-pred is given")
        model, _, _ = load_checkpoint(args.weights)
        triplets = [load_triplet(r) for r in scan_dataset(args.data, args.list)]
    report = evaluate(model, triplets, metrics)
    lines = report.to_lines()
    for line in lines:
        _out(line)
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n")
    return EXIT_OK


# -- bench -------------------------------------------------------------------


def cmd_bench(args) -> int:
    from threadpoolctl import threadpool_limits

    from .model import ModelConfig, PMCRNet
    from .tensor import Tensor
    from .validation import check_positive_int, parse_size

    h, w = parse_size(args.size)
    iters = check_positive_int(args.iters, "--iters")
    threads = check_positive_int(args.threads, "--threads")
    model = PMCRNet(ModelConfig(), seed=args.seed)
    rng = np.random.Generator(np.random.Philox(args.seed))
    f0 = Tensor(rng.random((1, 3, h, w), dtype=np.float32))
    f1 = Tensor(rng.random((1, 3, h, w), dtype=np.float32))
    times = []
    with threadpool_limits(limits=threads):
        for _ in range(iters):
            start = time.perf_counter()
            model.forward(f0, f1)
            times.append(time.perf_counter() - start)
    peak_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    t = np.array(times)
    _out(f"size={w}x{h} iters={iters} threads={threads} mean_ms={1e3 * t.mean():.1f} "
         f"std_ms={1e3 * t.std():.1f} params={model.param_count()} peak_rss_mb={peak_mb:.0f}")
    _out(f"reference: {REFERENCE_GPU_SECONDS} s per frame reported on a GPU for this architecture "
         f"(context only, different hardware class)")
    return EXIT_OK


# -- gradcheck / selftest ----------------------------------------------------


def _run_suite(checks, fault) -> int:
    from .selftest import format_table, run_checks

    results = run_checks(checks, fault)
    for line in format_table(results):
        _out(line)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_gradcheck(args) -> int:
    from .selftest import GRADCHECK_CHECKS, grad_end_to_end

    checks = list(GRADCHECK_CHECKS)
    if args.full:
        checks.append(("grad_end_to_end_model", grad_end_to_end))
    return _run_suite(checks, args.inject_fault)


def cmd_selftest(args) -> int:
    from .selftest import SELFTEST_CHECKS

    return _run_suite(SELFTEST_CHECKS, args.inject_fault)


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pmcrnet", description="Frame interpolation network: inference, training and checks.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("interpolate", help="synthesise the middle frame of two inputs")
    p.add_argument("--frame0", required=True)
    p.add_argument("--frame1", required=True)
    p.add_argument("--weights", required=True, help="checkpoint file")
    p.add_argument("--out", required=True, help="output PNG (or .ppm)")
    p.add_argument("--dump-flow", metavar="DIR", help="write flow_t0/flow_t1 as colour PNG and raw f32")
    p.add_argument("--dump-levels", metavar="DIR", help="write the per-level predicted frames")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("train", help="train on a triplet dataset")
    p.add_argument("--data", required=True, help="dataset root (Vimeo90K layout)")
    p.add_argument("--list", required=True, help="sequence list file, e.g. tri_trainlist.txt")
    p.add_argument("--out", required=True, help="output directory for log and checkpoints")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr-max", type=float)
    p.add_argument("--lr-min", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--crop", type=int)
    p.add_argument("--toy", action="store_true", help="CI preset: 4 triplets, 96x96, 300 steps")
    p.add_argument("--ablate", action="append", choices=("pmr", "pcr", "csm"),
                   help="remove a component (repeatable)")
    p.add_argument("--tau", choices=("annealed", "fixed", "off"), default="annealed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--list", required=True)
    p.add_argument("--weights")
    p.add_argument("--metrics", default="psnr,ssim,ie", help="comma list of psnr, ssim, ie")
    p.add_argument("--report", help="write the report here as well")
    p.add_argument("--gt-as-pred", action="store_true", help="harness mode: score ground truth against itself")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time forward passes on random input")
    p.add_argument("--size", default="640x480", help="WIDTHxHEIGHT")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--threads", type=int, default=1, help="BLAS threads (results stay deterministic only at 1)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    for name, fn, text in (("gradcheck", cmd_gradcheck, "finite-difference gradient suite"),
                           ("selftest", cmd_selftest, "invariant and oracle suite")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--inject-fault", choices=("conv-backward",), help="test hook: corrupt a kernel on purpose")
        if name == "gradcheck":
            p.add_argument("--full", action="store_true", help="also check the whole model loss (slow)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
