"""Command-line entry point: ``flowloc <subcommand> ...``.

File naming: every per-frame artifact is ``NNNNNN.<ext>`` with the frame
index zero-padded to six digits; flow file ``i`` describes motion from frame
``i`` to ``i + 1`` and fused map ``i`` pairs semantic map ``i`` with flow ``i``.
Set ``FLOWLOC_LOG`` (e.g. ``DEBUG``) to change log verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .boxes import STATIONARY_IOU, VEHICLE_CLASSES, boxes_to_mask, class_filter, mask_to_heatmap, stationarity_filter
from .core import Frame, Heatmap, resize_bilinear
from .errors import FlowlocError, InvalidInputError, PairingError
from .flow import FlowParams, aggregate_flow, farneback_flow, flow_magnitude
from .fusion import flowgrad_h, minmax_normalize
from .metrics import EvalConfig, default_auc_taus, evaluate
from .synth import load_scenario, render, semantic_oracle, simulated_detections

log = logging.getLogger("flowloc")

METHODS = ("flowgrad-h", "flow-only", "semantic-only", "boxes-cf-tf")
DEFAULT_CLASSES = ",".join(sorted(VEHICLE_CLASSES))


class UsageError(FlowlocError):
    pass


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}")
    return w, h


def _frame_span(text):
    try:
        a, b = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:STOP, got {text!r}")
    return range(a, b)


# ---------------------------------------------------------------- flow

def cmd_flow(args):
    params = FlowParams(
        pyramid_levels=args.levels,
        pyramid_scale=args.scale,
        window_size=args.winsize,
        iterations=args.iters,
        poly_n=args.poly_n,
        poly_sigma=args.poly_sigma,
        fps=args.fps,
    )
    frames = fio.load_frames(args.frames, args.fps, args.fps_source)
    if len(frames) < 2:
        raise UsageError(f"need at least 2 frames after subsampling, found {len(frames)}")
    if args.resize:
        w, h = args.resize
        frames = [Frame(np.clip(resize_bilinear(f.pixels, (h, w)), 0, 1), f.index) for f in frames]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for prev, nxt in zip(frames, frames[1:]):
        flow = farneback_flow(prev, nxt, params)
        path = out / fio.indexed_name(prev.index, ".flo")
        fio.write_flo(flow, path)
        mag = np.hypot(flow.u, flow.v)
        print(f"{path.name}: {flow.width}x{flow.height} mean {mag.mean():.4f} max {mag.max():.4f} px")


# ---------------------------------------------------------------- fuse

def _window(index, available, n):
    lo = index - n // 2
    return [i for i in range(lo, lo + n) if i in available]


def cmd_fuse(args):
    flows = fio.indexed_files(args.flow, ".flo")
    if not flows:
        raise InvalidInputError(f"no .flo files in {args.flow}")
    semantic = fio.indexed_files(args.semantic, ".pfm") if args.semantic else None
    if semantic is not None:
        missing = set(flows) - set(semantic)
        if missing:
            raise PairingError("semantic maps missing for flow fields", missing)

    n = 1
    if args.aggregate_window:
        n = max(1, int(round(args.aggregate_window * args.fps)))
    cache = {}

    def field(i):
        if i not in cache:
            cache[i] = fio.read_flo(flows[i])
        return cache[i]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in sorted(flows):
        if n == 1:
            motion = flow_magnitude(field(i))
        else:
            motion = aggregate_flow([field(j) for j in _window(i, flows, n)], args.aggregate_mode)
        if semantic is None:
            fused = minmax_normalize(motion)
        else:
            fused = flowgrad_h(fio.read_heatmap(semantic[i], motion.shape), motion)
        fio.write_heatmap(fused, out / fio.indexed_name(i, ".pfm"))
    print(f"fused {len(flows)} maps into {out} (window {n} fields)")


# ---------------------------------------------------------------- filter-boxes

def _full_range(boxsets):
    if not boxsets:
        return []
    idx = [b.frame_index for b in boxsets]
    return range(min(idx), max(idx) + 1)


def cmd_filter_boxes(args):
    sets = fio.read_annotations(args.boxes)
    sets = fio.read_annotations(args.boxes, _full_range(sets)) if sets else []
    allowed = {c.strip() for c in args.classes.split(",") if c.strip()}
    kept = stationarity_filter([class_filter(s, allowed) for s in sets], args.iou_thresh)
    fio.write_annotations(kept, args.out)
    before = sum(len(s) for s in sets)
    after = sum(len(s) for s in kept)
    print(f"kept {after} of {before} boxes")


# ---------------------------------------------------------------- eval

def cmd_eval(args):
    config = EvalConfig(
        tau=args.tau,
        auc_taus=default_auc_taus(args.auc_step),
        aggregate="mean-iou" if args.aggregate == "mean" else "success-ratio",
        success_cutoff=args.success_cutoff,
    )
    gt_sets = fio.read_annotations(args.gt)
    gt_by_index = {s.frame_index: s for s in gt_sets}
    pred_path = Path(args.pred)
    target = None
    if args.size:
        target = (args.size[1], args.size[0])
    elif args.frames:
        target = fio.load_frames(args.frames)[0].shape

    if pred_path.is_dir():
        files = fio.indexed_files(pred_path, ".pfm")
        indices = sorted(files)
        if args.frames_range is not None:
            indices = [i for i in indices if i in args.frames_range]
        missing = set(indices) - set(gt_by_index)
        if missing:
            raise PairingError("ground truth missing for predicted frames", missing)
        preds = [minmax_normalize(fio.read_heatmap(files[i], target)) for i in indices]
    else:
        indices = sorted(gt_by_index)
        if args.frames_range is not None:
            indices = [i for i in indices if i in args.frames_range]
        if target is None:
            raise UsageError("box predictions need --size or --frames to set the image size")
        h, w = target
        boxes = {s.frame_index: s for s in fio.read_annotations(pred_path)}
        preds = [
            mask_to_heatmap(boxes_to_mask(boxes[i], w, h)) if i in boxes else Heatmap(np.zeros((h, w)))
            for i in indices
        ]
    if not indices:
        raise InvalidInputError("no frames to evaluate")
    gts = [gt_by_index[i] for i in indices]
    report = evaluate(preds, gts, config)
    fio.write_report(report, args.out, args.format)
    print(f"frames {report.n_frames}  cIoU {report.ciou:.4f}  AUC {report.auc:.4f}  ({config.aggregate})")

    if args.overlay:
        from .viz import overlay_image

        odir = Path(args.overlay)
        odir.mkdir(parents=True, exist_ok=True)
        frames = {f.index: f for f in fio.load_frames(args.frames)} if args.frames else {}
        for i, p, g in zip(indices, preds, gts):
            bg = frames[i].pixels if i in frames else p.values
            if bg.shape != p.shape:
                bg = resize_bilinear(bg, p.shape)
            overlay_image(bg, p, g, config.tau).save(odir / fio.indexed_name(i, ".png"))
    return report


# ---------------------------------------------------------------- synth / pipeline

def cmd_synth(args):
    scenario = load_scenario(args.scenario)
    frames, gt = render(scenario)
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "semantic").mkdir(exist_ok=True)
    for f in frames:
        fio.write_frame(f, out / "frames" / fio.indexed_name(f.index, ".png"))
    for i, m in enumerate(semantic_oracle(scenario, args.semantic_mode)):
        fio.write_heatmap(m, out / "semantic" / fio.indexed_name(i, ".pfm"))
    fio.write_annotations(gt, out / "gt.csv")
    fio.write_annotations(simulated_detections(scenario), out / "detections.csv")
    print(f"rendered {len(frames)} frames of {scenario.width}x{scenario.height} into {out}")
    return scenario


def cmd_pipeline(args):
    out = Path(args.out)
    scenario = load_scenario(args.scenario)
    methods = METHODS if "all" in args.method else tuple(dict.fromkeys(args.method))
    run = lambda argv: main(argv, _raise=True)  # noqa: E731

    scene = out / "scene"
    run(["synth", "--scenario", str(args.scenario), "--out", str(scene)])
    span = f"0:{scenario.n_frames - 1}"
    if {"flowgrad-h", "flow-only"} & set(methods):
        run(["flow", "--frames", str(scene / "frames"), "--out", str(out / "flow")])

    summary = {}
    for method in methods:
        mdir = out / method
        common = ["--gt", str(scene / "gt.csv"), "--frames-range", span, "--out", str(mdir / "report.json")]
        if method == "flowgrad-h":
            run(["fuse", "--semantic", str(scene / "semantic"), "--flow", str(out / "flow"), "--out", str(mdir / "maps")])
            pred = ["--pred", str(mdir / "maps")]
        elif method == "flow-only":
            run(["fuse", "--flow", str(out / "flow"), "--out", str(mdir / "maps")])
            pred = ["--pred", str(mdir / "maps")]
        elif method == "semantic-only":
            mdir.mkdir(parents=True, exist_ok=True)
            pred = ["--pred", str(scene / "semantic")]
        else:
            mdir.mkdir(parents=True, exist_ok=True)
            run(["filter-boxes", "--boxes", str(scene / "detections.csv"), "--out", str(mdir / "boxes.csv")])
            pred = ["--pred", str(mdir / "boxes.csv"), "--size", f"{scenario.width}x{scenario.height}"]
        report = run(["eval", *pred, *common])
        summary[method] = {"ciou": report.ciou, "auc": report.auc, "n_frames": report.n_frames}

    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{'method':<16}{'cIoU':>8}{'AUC':>8}")
    for m, r in summary.items():
        print(f"{m:<16}{r['ciou']:>8.3f}{r['auc']:>8.3f}")
    return summary


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    d = FlowParams()

    f = sub.add_parser("flow", help="dense optical flow between consecutive frames")
    f.add_argument("--frames", required=True)
    f.add_argument("--fps", type=float, default=d.fps, help="target sampling rate")
    f.add_argument("--fps-source", type=float, default=None, help="rate of the files on disk (default: --fps)")
    f.add_argument("--levels", type=int, default=d.pyramid_levels)
    f.add_argument("--scale", type=float, default=d.pyramid_scale)
    f.add_argument("--winsize", type=int, default=d.window_size)
    f.add_argument("--iters", type=int, default=d.iterations)
    f.add_argument("--poly-n", type=int, default=d.poly_n)
    f.add_argument("--poly-sigma", type=float, default=d.poly_sigma)
    f.add_argument("--resize", type=_size, default=None, help="compute flow at WxH instead of native size")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_flow)

    u = sub.add_parser("fuse", help="multiply semantic maps with flow magnitude")
    u.add_argument("--semantic", default=None, help="PFM directory; omit for the flow-only baseline")
    u.add_argument("--flow", required=True)
    u.add_argument("--aggregate-window", type=float, default=None, help="seconds")
    u.add_argument("--aggregate-mode", choices=("mean", "max"), default="mean")
    u.add_argument("--fps", type=float, default=d.fps)
    u.add_argument("--out", required=True)
    u.set_defaults(func=cmd_fuse)

    b = sub.add_parser("filter-boxes", help="class and stationarity filtering of detections")
    b.add_argument("--boxes", required=True)
    b.add_argument("--iou-thresh", type=float, default=STATIONARY_IOU)
    b.add_argument("--classes", default=DEFAULT_CLASSES)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_filter_boxes)

    e = sub.add_parser("eval", help="cIoU / AUC of predictions against ground truth")
    e.add_argument("--pred", required=True, help="PFM directory or box CSV")
    e.add_argument("--gt", required=True)
    e.add_argument("--tau", type=float, default=0.5)
    e.add_argument("--aggregate", choices=("mean", "success"), default="mean")
    e.add_argument("--success-cutoff", type=float, default=0.5)
    e.add_argument("--auc-step", type=float, default=0.05)
    e.add_argument("--frames-range", type=_frame_span, default=None, help="START:STOP, half-open")
    e.add_argument("--size", type=_size, default=None)
    e.add_argument("--frames", default=None, help="frame directory for overlays / image size")
    e.add_argument("--format", choices=("json", "csv"), default=None)
    e.add_argument("--overlay", default=None)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="render a synthetic scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--semantic-mode", choices=("all-vehicles", "sounding-only"), default="all-vehicles")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    q = sub.add_parser("pipeline", help="synthesize a scene and score methods end to end")
    q.add_argument("--scenario", required=True)
    q.add_argument("--method", action="append", choices=METHODS + ("all",), default=None)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None, _raise=False):
    logging.basicConfig(level=os.environ.get("FLOWLOC_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "method", "unset") is None:
        args.method = ["all"]
    if _raise:
        return args.func(args)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"flowloc {args.command}: {exc}", file=sys.stderr)
        return 2
    except (FlowlocError, OSError) as exc:
        print(f"flowloc {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
