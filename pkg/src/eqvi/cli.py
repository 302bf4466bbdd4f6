"""Command-line entry point: ``eqvi {interpolate,eval,synth,flow} ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import motion
from .core import read_png, write_png
from .flow_estimation import BlockMatch, estimate_flow, load_flo, save_flo
from .flow_ops import refine_flow, reverse_flow
from .metrics import aggregate, evaluate, format_kv, format_table
from .pipeline import FrameQuad, Interpolator, PipelineConfig, load_config, with_factor
from .synth import MOTION_CLASSES, gen_dataset

log = logging.getLogger("eqvi")


class UsageError(Exception):
    pass


def _frame_files(directory: Path, pattern: str) -> list[Path]:
    if not directory.is_dir():
        raise UsageError(f"not a directory: {directory}")
    return sorted(p for p in directory.glob(pattern) if p.is_file())


def cmd_interpolate(args) -> int:
    in_dir = Path(args.in_dir)
    files = _frame_files(in_dir, args.pattern)
    if len(files) < 2:
        raise UsageError(f"need at least two frames in {in_dir}, found {len(files)}")
    cfg = load_config(args.config) if args.config else PipelineConfig()
    cfg = with_factor(cfg, args.factor)
    frames = [read_png(p) for p in files]
    n = len(frames)
    interp = Interpolator(cfg)

    def window(i: int) -> list[np.ndarray]:
        # boundary windows replicate the end frame; frame indices double as flow-file times
        idx = [min(max(k, 0), n - 1) for k in (i - 1, i, i + 1, i + 2)]
        quad = FrameQuad(tuple(frames[k] for k in idx), tuple(idx))
        return [r.frame for r in interp.run_multi(quad)]

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        results = list(pool.map(window, range(n - 1)))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    f = args.factor
    for i, frame in enumerate(frames):
        write_png(out_dir / f"frame_{i * f:06d}.png", frame)
    for i, outs in enumerate(results):
        for k, frame in enumerate(outs, start=1):
            write_png(out_dir / f"frame_{i * f + k:06d}.png", frame)
    log.info("wrote %d original and %d interpolated frames to %s", n, sum(map(len, results)), out_dir)
    return 0


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    preds = _frame_files(pred_dir, args.pattern)
    gts = _frame_files(gt_dir, args.pattern)
    gt_names = {p.name for p in gts}
    pairs = [(p, gt_dir / p.name) for p in preds if p.name in gt_names]
    if not pairs:
        raise UsageError("no frames with matching names in the two directories")
    reports = {p.name: evaluate(read_png(p), read_png(g)) for p, g in pairs}
    reports["aggregate"] = aggregate(list(reports.values()))
    print(format_table(reports))
    if args.out:
        Path(args.out).write_text(format_kv(reports))
    return 0


def cmd_synth(args) -> int:
    gen_dataset(args.out_dir, args.seed, args.motion_class, args.count,
                height=args.height, width=args.width, n_sprites=args.sprites)
    return 0


def cmd_flow_estimate(args) -> int:
    src = BlockMatch(args.levels, args.radius, args.patch)
    save_flo(args.out, estimate_flow(src, read_png(args.frame_a), read_png(args.frame_b)))
    return 0


def cmd_flow_reverse(args) -> int:
    back, vis = reverse_flow(load_flo(args.flow))
    if args.refine:
        back = refine_flow(back)
    save_flo(args.out, back)
    if args.visibility:
        write_png(args.visibility, vis)
    return 0


def cmd_flow_predict(args) -> int:
    f01 = load_flo(args.f01)
    if args.linear:
        flow = motion.linear_predict(f01, args.t)
    else:
        if args.f0m1 is None:
            raise UsageError("quadratic prediction needs --f0m1")
        f0m1 = load_flo(args.f0m1)
        if args.f02 is not None:
            params = motion.RQFPParams(args.omega, args.gamma)
            m = motion.rectified_predict(f0m1, f01, load_flo(args.f02), params)
        else:
            m = motion.qvi_predict(f01, f0m1)
        flow = motion.eval_flow_at(m, args.t)
    save_flo(args.out, flow)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqvi", description="Quadratic video frame interpolation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interpolate", help="raise the frame rate of a directory of frames")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--factor", type=int, choices=(2, 4), default=2)
    p.add_argument("--config")
    p.add_argument("--pattern", default="*.png", help="glob selecting input frames (default: *.png)")
    p.add_argument("--workers", type=int, default=1, help="windows processed in parallel")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("eval", help="compare predicted frames with ground truth")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--pattern", default="*.png")
    p.add_argument("--out", help="write key=value metrics here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic sprite dataset")
    p.add_argument("out_dir")
    p.add_argument("--class", dest="motion_class", choices=MOTION_CLASSES, default="quadratic")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--sprites", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("flow", help="file-level flow tools")
    fsub = p.add_subparsers(dest="flow_command", required=True)
    q = fsub.add_parser("estimate", help="block-matching flow between two frames")
    q.add_argument("frame_a")
    q.add_argument("frame_b")
    q.add_argument("out")
    q.add_argument("--levels", type=int, default=3)
    q.add_argument("--radius", type=int, default=2)
    q.add_argument("--patch", type=int, default=5)
    q.set_defaults(func=cmd_flow_estimate)
    q = fsub.add_parser("reverse", help="reverse a forward flow")
    q.add_argument("flow")
    q.add_argument("out")
    q.add_argument("--visibility", help="write the visibility mask as PNG")
    q.add_argument("--refine", action="store_true", help="apply the 3x3 median refinement")
    q.set_defaults(func=cmd_flow_reverse)
    q = fsub.add_parser("predict", help="intermediate flow f_{0->t}")
    q.add_argument("f01")
    q.add_argument("out")
    q.add_argument("--t", type=float, required=True)
    q.add_argument("--f0m1")
    q.add_argument("--f02", help="enables rectified least-squares prediction")
    q.add_argument("--linear", action="store_true")
    q.add_argument("--omega", type=float, default=5.0)
    q.add_argument("--gamma", type=float, default=1.0)
    q.set_defaults(func=cmd_flow_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"eqvi: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"eqvi: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
