"""Figure rendering for the CLI report paths.

Every reporting subcommand that writes delimited output can drop a PNG
next to it; these helpers own the matplotlib side. The Agg backend is
forced so headless runs behave.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_plan_figure(plan, weights, path):
    """Window spans with the blend taper and per-frame coverage."""
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for row, (s, e) in enumerate(plan.bounds()):
        ax0.plot([s, e], [row, row], lw=6, solid_capstyle="butt", alpha=0.7)
    ax0.set_ylabel("window")
    ax0.set_title(f"{len(plan.starts)} windows, W={plan.length}, O={plan.overlap}")
    counts = plan.coverage_counts()
    frames = range(1, plan.total + 1)
    ax1.bar(frames, counts, width=0.9, color="#777777")
    ax1.set_xlabel("frame")
    ax1.set_ylabel("coverage")
    axw = ax1.twinx()
    s0 = plan.starts[0]
    axw.plot(range(s0, s0 + plan.length), weights.values, color="#cc3311", lw=1.5)
    axw.set_ylabel("weight", color="#cc3311")
    return _finish(fig, path)


def save_convergence_figure(results, path):
    """Log-log endpoint error against step count, one line per solver."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for res in results:
        ns = [n for n, _ in res.rows]
        errs = [e for _, e in res.rows]
        label = f"{res.solver} (slope {res.slope:+.2f})" if math.isfinite(res.slope) \
            else f"{res.solver} (exact)"
        ax.loglog(ns, errs, marker="o", base=2, label=label)
    ax.set_xlabel("steps N")
    ax.set_ylabel("max endpoint error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _finish(fig, path)


def save_loss_figure(curve, path):
    """Training loss curve with the per-region components."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    steps = [row[0] for row in curve]
    ax.semilogy(steps, [row[1] for row in curve], label="total", color="#222222")
    ax.semilogy(steps, [row[2] for row in curve], label="masked", alpha=0.7)
    ax.semilogy(steps, [row[3] for row in curve], label="unmasked", alpha=0.7)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _finish(fig, path)


def save_scaling_figure(result, path):
    """Wall time against sequence length with the linear fit and residency."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 4))
    ts = [r[0] for r in result.rows]
    ys = [r[1] for r in result.rows]
    ax0.plot(ts, ys, "o", label="measured")
    ax0.plot(ts, [result.fitted(t) for t in ts], "-",
             label=f"fit (R^2={result.r2:.4f})")
    ax0.set_xlabel("frames T")
    ax0.set_ylabel("wall seconds")
    ax0.grid(True, alpha=0.3)
    ax0.legend()
    ax1.plot(ts, [r[2] for r in result.rows], "s-", color="#cc3311")
    ax1.set_xlabel("frames T")
    ax1.set_ylabel("peak window elements")
    ax1.set_ylim(bottom=0)
    ax1.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_metrics_figure(report, path):
    """Per-frame PSNR and SSIM for one evaluated sequence."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    frames = range(report.frames)
    finite = [p if math.isfinite(p) else float("nan") for p in report.psnr_frames]
    ax.plot(frames, finite, "o-", label="PSNR (dB)")
    ax.set_xlabel("frame")
    ax.set_ylabel("PSNR (dB)")
    ax.grid(True, alpha=0.3)
    ax2 = ax.twinx()
    ax2.plot(frames, report.ssim_frames, "s--", color="#cc3311", label="SSIM")
    ax2.set_ylabel("SSIM", color="#cc3311")
    ax.set_title(f"region={report.region}")
    return _finish(fig, path)
