"""Sliding-window co-denoising over a long latent buffer.

Per schedule step: extract every planned window from the shared buffer,
advance each with the configured stepper, then blend all outputs back with
the Hamming taper before the next step begins. Windows never exchange
information mid-step; the blend is the only cross-window channel.

Windows run in batches of ``workers``; each batch joins before its outputs
are folded (in window order, float64) into the step accumulator. That
bounds live window state at workers * W * d elements no matter how long
the sequence is, while keeping results bit-identical to the sequential
path. Fields advertising ``reentrant = False`` are run single-worker.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import DTYPE, LatentSequence, NoiseSchedule, make_rng
from .solvers import euler_step, get_stepper
from .windowing import hamming_weights, plan_windows


@dataclass
class CoDenoiseConfig:
    length: int
    overlap: int
    schedule: NoiseSchedule
    solver: str = "heun"
    workers: int = 1
    final_step_euler: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        get_stepper(self.solver)  # validate early


@dataclass(eq=False)
class RunStats:
    """Footprint and timing record for one codenoise run."""

    steps: int = 0
    windows: int = 0
    blends: int = 0
    peak_live_windows: int = 0
    peak_window_elements: int = 0
    step_seconds: list = field(default_factory=list)
    total_seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "windows": self.windows,
            "blends": self.blends,
            "peak_live_windows": self.peak_live_windows,
            "peak_window_elements": self.peak_window_elements,
            "step_seconds": list(self.step_seconds),
            "total_seconds": self.total_seconds,
        }


def _window_fields(field_obj, starts, length):
    if hasattr(field_obj, "for_window"):
        return [field_obj.for_window(s, length) for s in starts]
    return [field_obj] * len(starts)


def codenoise(x0: LatentSequence, field_obj, cfg: CoDenoiseConfig):
    """Run the full schedule with per-step windowed denoising and blending.

    Requires frames >= window length; shorter buffers should go through a
    plain solve instead. Returns (final LatentSequence, RunStats).
    """
    total = x0.frames
    if total < cfg.length:
        raise ValueError(
            f"frames {total} < window {cfg.length}; use a plain solve for short buffers"
        )
    plan = plan_windows(total, cfg.length, cfg.overlap)
    taper = hamming_weights(cfg.length)
    fields = _window_fields(field_obj, plan.starts, cfg.length)
    workers = cfg.workers if getattr(field_obj, "reentrant", True) else 1
    step_fn = get_stepper(cfg.solver)

    stats = RunStats(windows=len(plan.starts))
    live = 0

    buffer = x0.buffer.copy()
    dim = x0.dim
    col = taper.values[:, None]
    gaps = cfg.schedule.gaps()
    started = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for idx, (t0, t1) in enumerate(gaps):
            tick = time.perf_counter()
            dt = t0 - t1
            fn = euler_step if (cfg.final_step_euler and idx == len(gaps) - 1) else step_fn
            num = np.zeros((total, dim), dtype=np.float64)
            den = np.zeros(total, dtype=np.float64)

            def advance(i):
                s = plan.starts[i]
                window = buffer[s - 1 : s - 1 + cfg.length].copy()
                return fn(fields[i], window, t0, dt)

            order = range(len(plan.starts))
            for batch_start in range(0, len(plan.starts), workers):
                batch = list(order[batch_start : batch_start + workers])
                live += len(batch)
                stats.peak_live_windows = max(stats.peak_live_windows, live)
                if pool is None:
                    outs = [advance(i) for i in batch]
                else:
                    outs = list(pool.map(advance, batch))
                for i, out in zip(batch, outs):
                    s = plan.starts[i]
                    sl = slice(s - 1, s - 1 + cfg.length)
                    num[sl] += col * out.astype(np.float64)
                    den[sl] += taper.values
                    live -= 1
            buffer = (num / den[:, None]).astype(DTYPE)
            stats.blends += 1
            stats.steps += 1
            stats.step_seconds.append(time.perf_counter() - tick)
    finally:
        if pool is not None:
            pool.shutdown()
    stats.peak_window_elements = stats.peak_live_windows * cfg.length * dim
    stats.total_seconds = time.perf_counter() - started
    return LatentSequence(buffer), stats


@dataclass(eq=False)
class ProbeResult:
    rows: list  # (frames, best wall seconds, peak window elements)
    slope: float  # fitted seconds per frame
    intercept: float
    r2: float

    def fitted(self, frames: int) -> float:
        return self.slope * frames + self.intercept


def scaling_probe(field_obj, cfg: CoDenoiseConfig, frame_counts, latent_dim: int,
                  seed: int = 0, repeats: int = 3) -> ProbeResult:
    """Time codenoise across sequence lengths and fit seconds ~ frames.

    Each length runs ``repeats`` times from the same seeded start buffer;
    the best wall time survives (least scheduler noise). Residency comes
    from RunStats and should not move with length at all.
    """
    counts = [int(t) for t in frame_counts]
    if len(counts) < 3:
        raise ValueError("need at least 3 sequence lengths")
    if any(t < cfg.length for t in counts):
        raise ValueError("every length must be >= the window length")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    for total in counts:
        x0 = LatentSequence(
            make_rng(seed).standard_normal((total, latent_dim), dtype=np.float32)
        )
        best = None
        peak = 0
        for _ in range(repeats):
            _, stats = codenoise(x0, field_obj, cfg)
            best = stats.total_seconds if best is None else min(best, stats.total_seconds)
            peak = max(peak, stats.peak_window_elements)
        rows.append((total, best, peak))
    xs = np.array([r[0] for r in rows], dtype=np.float64)
    ys = np.array([r[1] for r in rows], dtype=np.float64)
    slope, intercept = np.polyfit(xs, ys, 1)
    fit = slope * xs + intercept
    ss_res = float(np.sum((ys - fit) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return ProbeResult(rows, float(slope), float(intercept), r2)
