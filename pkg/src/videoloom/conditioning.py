"""Mask-conditioned inpainting and outpainting on top of codenoise.

Outpainting is normalized away immediately: the source is zero-padded onto
the target canvas and the pad region becomes a border hole, after which
both tasks share one path. That makes the outpaint / padded-inpaint
equivalence hold bit-exactly by construction rather than approximately.

The evolving latent buffer starts as context latents outside the hole and
schedule-level noise inside it. Context enters the model only as fixed
conditioning channels (it is never re-noised), and after the last step the
context pixels are restored from the input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import DTYPE, LatentSequence, NoiseSchedule, make_rng
from .denoisers import IdentityCodec
from .masks import MaskVolume, PadSpec, apply_mask, pad_for_outpaint
from .orchestrator import CoDenoiseConfig, RunStats, codenoise

TASKS = ("inpaint", "outpaint")


@dataclass(eq=False)
class EditRequest:
    """One edit job: frames, what to fill, and how to integrate."""

    frames: np.ndarray  # [T, H, W] float32 in [0, 1]
    schedule: NoiseSchedule
    task: str = "inpaint"
    mask: MaskVolume | None = None
    pad: PadSpec | None = None
    solver: str = "heun"
    window: tuple[int, int] = (8, 2)  # (length, overlap)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=DTYPE)
        if self.frames.ndim != 3:
            raise ValueError("frames must be [T, H, W]")
        if not np.isfinite(self.frames).all():
            raise ValueError("frames contain non-finite values")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.task == "inpaint":
            if self.mask is None:
                raise ValueError("inpaint requests need a mask")
            if self.mask.data.shape != self.frames.shape:
                raise ValueError("mask volume does not match the frames")
        else:
            if self.pad is None:
                raise ValueError("outpaint requests need a pad spec")
        w, o = self.window
        if w < 1 or not (0 <= o < w):
            raise ValueError("window must satisfy W >= 1 and 0 <= O < W")


def normalize_request(req: EditRequest):
    """Reduce either task to (frames, hole mask) on a single canvas."""
    if req.task == "inpaint":
        return req.frames, req.mask
    return pad_for_outpaint(req.frames, req.pad)


def build_context(req: EditRequest, codec=None):
    """Encode masked frames into context latents plus the latent-space mask.

    The pixel mask rides through the codec's own spatial transform
    (identity keeps it; pooling averages then thresholds at 0.5).
    """
    codec = codec or IdentityCodec()
    frames, mask = normalize_request(req)
    latents = codec.encode(apply_mask(frames, mask))
    latent_mask = codec.encode_mask(mask)
    return latents, latent_mask


@dataclass(eq=False)
class ConditionedField:
    """Slope field view of a toy model with per-frame conditioning rows.

    The orchestrator asks for window-aligned views via for_window, so each
    window's forward sees exactly its own mask/context rows.
    """

    model: object
    ctx: np.ndarray   # [T, d] float32
    mask: np.ndarray  # [T, d] float32
    start: int = 1    # 1-based first frame this view covers
    reentrant: bool = dc_field(default=True, repr=False)

    def for_window(self, start: int, length: int):
        if start < 1 or start - 1 + length > self.ctx.shape[0]:
            raise ValueError("window outside the conditioned range")
        return ConditionedField(
            self.model,
            self.ctx[start - 1 : start - 1 + length],
            self.mask[start - 1 : start - 1 + length],
            start=self.start + start - 1,
        )

    def __call__(self, x, t):
        if x.shape != self.ctx.shape:
            raise ValueError(f"state {x.shape} does not match conditioning {self.ctx.shape}")
        return self.model.forward_batch(x, self.mask, self.ctx, t)


@dataclass(eq=False)
class EditResult:
    frames: np.ndarray
    stats: RunStats
    window: tuple[int, int]
    mask: MaskVolume  # hole mask on the output canvas


def run_edit_full(req: EditRequest, model, codec=None) -> EditResult:
    """Full pipeline: build context, co-denoise, decode, restore context.

    A request whose clip is shorter than its window length degrades to a
    single whole-buffer window (overlap clamps along with the length).
    """
    codec = codec or IdentityCodec()
    frames, mask = normalize_request(req)
    total = frames.shape[0]
    latents = codec.encode(apply_mask(frames, mask))
    latent_mask = codec.encode_mask(mask)

    ctx_flat = latents.reshape(total, -1).astype(DTYPE)
    mask_flat = latent_mask.data.reshape(total, -1).astype(DTYPE)
    dim = ctx_flat.shape[1]
    if getattr(model, "latent_dim", dim) != dim:
        raise ValueError(f"model expects dim {model.latent_dim}, request encodes to {dim}")

    length = min(req.window[0], total)
    overlap = min(req.window[1], length - 1)

    rng = make_rng(req.seed)
    noise = rng.standard_normal((total, dim), dtype=np.float32)
    t0 = req.schedule.levels[0]
    x_init = ((1.0 - mask_flat) * ctx_flat + mask_flat * (t0 * noise)).astype(DTYPE)

    field_obj = ConditionedField(model, ctx_flat, mask_flat)
    cfg = CoDenoiseConfig(length=length, overlap=overlap, schedule=req.schedule,
                          solver=req.solver, workers=req.workers)
    out_seq, stats = codenoise(LatentSequence(x_init), field_obj, cfg)

    decoded = codec.decode(out_seq.buffer.reshape(latents.shape))
    hole = mask.data.astype(bool)
    restored = np.where(hole, decoded, frames).astype(DTYPE)
    return EditResult(restored, stats, (length, overlap), mask)


def run_edit(req: EditRequest, model, codec=None) -> np.ndarray:
    """Output frames only; see run_edit_full for stats and metadata."""
    return run_edit_full(req, model, codec=codec).frames
