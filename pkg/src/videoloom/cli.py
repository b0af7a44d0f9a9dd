"""Command-line surface.

Subcommands mirror the library: plan, convergence-study, sample,
scaling-probe, train, inpaint, outpaint, eval. Reporting commands write
CSV; given an output directory they also render a PNG figure next to the
delimited output. Wall-clock numbers stay out of result CSVs and
checkpoints so repeated seeded runs are byte-identical; timings live in
the JSON run manifests.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import pgm, report
from .conditioning import EditRequest, run_edit_full
from .core import LatentSequence, make_rng, make_schedule, write_lvt
from .denoisers import (GaussianOracle, ToyDenoiser, load_checkpoint,
                        make_codec, save_checkpoint)
from .lora import attach
from .masks import MaskVolume, PadSpec, read_mask_pgm, write_mask_pgm
from .metrics import evaluate_sequence
from .orchestrator import CoDenoiseConfig, codenoise, scaling_probe
from .solvers import STEPPERS, convergence_study
from .training import ClipDistribution, TrainConfig, train
from .windowing import hamming_weights, plan_windows


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _emit_csv(out_dir, name, header, rows) -> Path | None:
    text = _csv_text(header, rows)
    if out_dir is None:
        sys.stdout.write(text)
        return None
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _checksums(paths) -> dict:
    return {Path(p).name: _sha256(p) for p in sorted(paths, key=lambda p: Path(p).name)}


def _write_manifest(out_dir: Path, payload: dict) -> Path:
    path = Path(out_dir) / "run_manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _schedule_from_args(args):
    return make_schedule(args.schedule, args.t_max, args.steps, rho=args.rho)


def _add_schedule_flags(p, steps_default=12):
    p.add_argument("--schedule", choices=("linear", "power"), default="linear")
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=steps_default,
                   help="number of solver steps in the schedule")
    p.add_argument("--rho", type=float, default=3.0,
                   help="exponent for the power schedule")


def _cmd_plan(args) -> int:
    plan = plan_windows(args.frames, args.window, args.overlap)
    out = Path(args.out) if args.out else None
    _emit_csv(out, "windows.csv", ("i", "start", "end"),
              [(i + 1, s, e) for i, (s, e) in enumerate(plan.bounds())])
    if out is None:
        sys.stdout.write("\n")
    _emit_csv(out, "coverage.csv", ("frame", "coverage"),
              list(enumerate(plan.coverage_counts(), start=1)))
    if out is not None and not args.no_figure:
        report.save_plan_figure(plan, hamming_weights(plan.length), out / "plan.png")
    return 0


def _cmd_convergence(args) -> int:
    oracle = GaussianOracle(args.variance)
    results = []
    for solver in args.solvers:
        results.append(
            convergence_study(oracle, oracle.exact, solver, args.step_counts,
                              t_max=args.t_max, kind=args.schedule, rho=args.rho)
        )
    rows = []
    for res in results:
        rows += [(res.solver, n, err, res.slope) for n, err in res.rows]
    out = Path(args.out) if args.out else None
    _emit_csv(out, "convergence.csv", ("solver", "n", "error", "slope"), rows)
    if out is not None and not args.no_figure:
        report.save_convergence_figure(results, out / "convergence.png")
    return 0


def _load_model(args):
    if args.checkpoint:
        return load_checkpoint(args.checkpoint)
    return None


def _cmd_sample(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schedule = _schedule_from_args(args)
    model = _load_model(args)
    if model is None:
        field = GaussianOracle(args.variance)
        dim = args.dim
    else:
        from .conditioning import ConditionedField

        dim = model.latent_dim
        # unconditional: the whole buffer is hole, context is empty
        ones = np.ones((args.frames, dim), dtype=np.float32)
        field = ConditionedField(model, np.zeros_like(ones), ones)
    rng = make_rng(args.seed)
    x0 = LatentSequence(
        (schedule.levels[0] * rng.standard_normal((args.frames, dim),
                                                  dtype=np.float32)).astype(np.float32)
    )
    cfg = CoDenoiseConfig(length=args.window, overlap=args.overlap,
                          schedule=schedule, solver=args.solver,
                          workers=args.workers)
    seq, stats = codenoise(x0, field, cfg)
    latents_path = out / "sample.lvt"
    write_lvt(seq.buffer, latents_path)
    written = [latents_path]
    if args.height and args.width:
        if args.height * args.width != dim:
            raise SystemExit("--height * --width must equal the latent dim")
        frames = seq.buffer.reshape(args.frames, args.height, args.width)
        written += pgm.write_frame_dir(out / "frames", np.clip(frames, 0.0, 1.0))
    payload = {
        "command": "sample",
        "params": {k: v for k, v in vars(args).items() if k != "func"},
        "stats": stats.as_dict(),
        "checksums": _checksums(written),
    }
    _write_manifest(out, payload)
    return 0


def _cmd_scaling_probe(args) -> int:
    schedule = _schedule_from_args(args)
    cfg = CoDenoiseConfig(length=args.window, overlap=args.overlap,
                          schedule=schedule, solver=args.solver,
                          workers=args.workers)
    model = ToyDenoiser(args.dim, hidden=tuple(args.hidden), seed=args.model_seed,
                        zero_output=False)
    from .conditioning import ConditionedField

    max_frames = max(args.frame_counts)
    ones = np.ones((max_frames, args.dim), dtype=np.float32)
    field = ConditionedField(model, np.zeros_like(ones), ones)
    result = scaling_probe(field, cfg, args.frame_counts, args.dim,
                           seed=args.seed, repeats=args.repeats)
    rows = [(t, secs, peak, result.fitted(t), result.r2)
            for t, secs, peak in result.rows]
    out = Path(args.out) if args.out else None
    _emit_csv(out, "scaling.csv",
              ("frames", "seconds", "peak_window_elements", "fitted_seconds", "r2"),
              rows)
    if out is not None and not args.no_figure:
        report.save_scaling_figure(result, out / "scaling.png")
    return 0


def _cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dist = ClipDistribution(frames=args.clip_frames, height=args.clip_height,
                            width=args.clip_width, square=args.square,
                            intensity=args.intensity)
    schedule = _schedule_from_args(args)
    model = ToyDenoiser(dist.latent_dim, hidden=tuple(args.hidden),
                        seed=args.model_seed)
    handle = attach(model, range(model.layer_count), args.rank,
                    make_rng(args.adapter_seed))
    cfg = TrainConfig(steps=args.train_steps, lam=args.lam, lr=args.lr,
                      momentum=args.momentum, seed=args.seed, dist=dist,
                      schedule=schedule)
    result = train(handle, cfg)
    ckpt_dir = out / "checkpoint"
    save_checkpoint(handle, ckpt_dir)
    curve_path = _emit_csv(out, "loss_curve.csv",
                           ("step", "loss", "masked", "unmasked"), result.curve)
    if not args.no_figure and result.curve:
        report.save_loss_figure(result.curve, out / "loss_curve.png")
    written = sorted(ckpt_dir.iterdir()) + [curve_path]
    payload = {
        "command": "train",
        "params": {k: v for k, v in vars(args).items() if k != "func"},
        "final_loss": result.final_loss,
        "checksums": _checksums(written),
    }
    _write_manifest(out, payload)
    return 0


def _edit_common(args, task: str) -> int:
    out = Path(args.out)
    frames = pgm.read_frame_dir(args.input)
    model = load_checkpoint(args.checkpoint)
    codec = make_codec(args.codec)
    schedule = _schedule_from_args(args)
    if task == "inpaint":
        mask = read_mask_pgm(args.mask, frames.shape[0])
        pad = None
    else:
        mask = None
        if args.offset is None:
            top = (args.target[0] - frames.shape[1]) // 2
            left = (args.target[1] - frames.shape[2]) // 2
        else:
            top, left = args.offset
        pad = PadSpec(height=args.target[0], width=args.target[1], top=top, left=left)
    req = EditRequest(frames=frames, schedule=schedule, task=task, mask=mask,
                      pad=pad, solver=args.solver,
                      window=(args.window, args.overlap), seed=args.seed,
                      workers=args.workers)
    result = run_edit_full(req, model, codec=codec)
    written = pgm.write_frame_dir(out / "frames", result.frames)
    mask_path = out / "hole_mask.pgm"
    write_mask_pgm(mask_path, result.mask)
    written.append(mask_path)
    payload = {
        "command": task,
        "params": {k: v for k, v in vars(args).items() if k != "func"},
        "window_used": list(result.window),
        "stats": result.stats.as_dict(),
        "checksums": _checksums(written),
    }
    _write_manifest(out, payload)
    return 0


def _cmd_inpaint(args) -> int:
    return _edit_common(args, "inpaint")


def _cmd_outpaint(args) -> int:
    return _edit_common(args, "outpaint")


def _cmd_eval(args) -> int:
    pred = pgm.read_frame_dir(args.pred)
    ref = pgm.read_frame_dir(args.reference)
    region = None
    if args.region == "masked":
        if not args.mask:
            raise SystemExit("--region masked needs --mask")
        region = read_mask_pgm(args.mask, pred.shape[0])
    rep = evaluate_sequence(pred, ref, peak=args.peak, region=region)
    rows = [(t, p, s, "n/a")
            for t, (p, s) in enumerate(zip(rep.psnr_frames, rep.ssim_frames))]
    rows.append(("mean", rep.psnr_mean, rep.ssim_mean, "n/a"))
    ssim_skipped = sum(1 for s in rep.ssim_frames if math.isnan(s))
    rows.append(("skipped", rep.psnr_skipped, ssim_skipped, "n/a"))
    out = Path(args.out) if args.out else None
    _emit_csv(out, "metrics.csv", ("frame", "psnr", "ssim", "lpips"), rows)
    if out is not None and not args.no_figure:
        report.save_metrics_figure(rep, out / "metrics.png")
    return 0


def _add_edit_flags(p):
    p.add_argument("--input", required=True, help="input frame directory (PGM/PPM)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--codec", choices=("identity", "pool2"), default="identity")
    p.add_argument("--solver", choices=sorted(STEPPERS), default="heun")
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--overlap", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_schedule_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="videoloom",
        description="Sliding-window co-denoising for long-video inpainting/outpainting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print the window table and coverage counts")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--overlap", type=int, required=True)
    p.add_argument("--out", help="directory for windows.csv/coverage.csv + figure")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("convergence-study", help="solver order against the Gaussian oracle")
    p.add_argument("--solvers", nargs="+", choices=sorted(STEPPERS),
                   default=["euler", "heun", "paper", "midpoint"])
    p.add_argument("--step-counts", nargs="+", type=int,
                   default=[4, 8, 16, 32, 64])
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--schedule", choices=("linear", "power"), default="linear")
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=3.0)
    p.add_argument("--out")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("sample", help="unconditional co-denoising demo")
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--overlap", type=int, default=2)
    p.add_argument("--solver", choices=sorted(STEPPERS), default="heun")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--variance", type=float, default=1.0,
                   help="oracle variance when no checkpoint is given")
    p.add_argument("--checkpoint", help="toy model checkpoint to sample instead")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--out", required=True)
    _add_schedule_flags(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("scaling-probe", help="runtime/memory scaling across lengths")
    p.add_argument("--frame-counts", nargs="+", type=int, default=[100, 200, 400])
    p.add_argument("--window", type=int, default=16)
    p.add_argument("--overlap", type=int, default=4)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--hidden", nargs="+", type=int, default=[64])
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--solver", choices=sorted(STEPPERS), default="euler")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out")
    p.add_argument("--no-figure", action="store_true")
    _add_schedule_flags(p, steps_default=6)
    p.set_defaults(func=_cmd_scaling_probe)

    p = sub.add_parser("train", help="train adapters with the dual-region loss")
    p.add_argument("--out", required=True)
    p.add_argument("--train-steps", type=int, default=400)
    p.add_argument("--lam", type=float, default=0.9)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank", type=int, default=4)
    p.add_argument("--hidden", nargs="+", type=int, default=[48])
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--adapter-seed", type=int, default=1)
    p.add_argument("--clip-frames", type=int, default=8)
    p.add_argument("--clip-height", type=int, default=8)
    p.add_argument("--clip-width", type=int, default=8)
    p.add_argument("--square", type=int, default=3)
    p.add_argument("--intensity", type=float, default=1.0)
    p.add_argument("--no-figure", action="store_true")
    _add_schedule_flags(p, steps_default=10)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("inpaint", help="fill a masked hole in a clip")
    p.add_argument("--mask", required=True, help="PGM mask, bytes >= 128 are hole")
    _add_edit_flags(p)
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("outpaint", help="extend a clip onto a larger canvas")
    p.add_argument("--target", nargs=2, type=int, required=True,
                   metavar=("HEIGHT", "WIDTH"))
    p.add_argument("--offset", nargs=2, type=int, metavar=("TOP", "LEFT"),
                   help="source placement; defaults to centered")
    _add_edit_flags(p)
    p.set_defaults(func=_cmd_outpaint)

    p = sub.add_parser("eval", help="PSNR/SSIM against a reference")
    p.add_argument("--pred", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--mask", help="PGM mask for region-restricted scoring")
    p.add_argument("--region", choices=("full", "masked"), default="full")
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--out")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
