"""Adapter training with the dual-region reconstruction loss.

One training batch is one synthetic clip, one mask draw (border or
interior, even odds), and one noise level drawn uniformly from the
schedule's nonzero levels. The clip is noised everywhere (x_t = x0 + t*eps,
variance-exploding), the model predicts a slope, and the loss compares the
one-step jump x_hat = x_t + t * f against the clean clip:

    L = lam * sum(M (x_hat - x0)^2) + (1 - lam) * sum((1-M) (x_hat - x0)^2)

Gradients are hand-derived and flow only into adapter factors; they are
checked against central finite differences, which is why everything here
runs in float64 until the SGD write-back rounds to float32 storage.
Training uses the identity codec: pixel and latent space coincide, so the
loss lives in both at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import DTYPE, NoiseSchedule, make_rng, make_schedule
from .masks import MaskVolume, sample_border_mask, sample_interior_mask

DEFAULT_LAMBDA = 0.9


@dataclass(frozen=True)
class SyntheticClipSpec:
    """A moving bright square on a dark background; positions wrap."""

    frames: int
    height: int
    width: int
    square: int = 3
    velocity: tuple[int, int] = (0, 1)  # (rows, cols) per frame
    intensity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.height < 1 or self.width < 1:
            raise ValueError("spatial extents must be >= 1")
        if not (1 <= self.square <= min(self.height, self.width)):
            raise ValueError("square side must fit the frame")
        if not (0.0 < self.intensity <= 1.0):
            raise ValueError("intensity must lie in (0, 1]")


def make_synthetic_clip(spec: SyntheticClipSpec) -> np.ndarray:
    """Render [T, H, W] float32 frames in [0, 1] from the clip spec.

    The start position comes from the spec seed; per-frame motion wraps
    modulo the frame size, so the lit pixel count is conserved.
    """
    rng = make_rng(spec.seed)
    top0 = int(rng.integers(0, spec.height))
    left0 = int(rng.integers(0, spec.width))
    side = np.arange(spec.square)
    clip = np.zeros((spec.frames, spec.height, spec.width), dtype=DTYPE)
    # velocity is (dx, dy): first component moves the column, second the row
    for t in range(spec.frames):
        rows = (top0 + t * spec.velocity[1] + side) % spec.height
        cols = (left0 + t * spec.velocity[0] + side) % spec.width
        clip[t][np.ix_(rows, cols)] = spec.intensity
    return clip


@dataclass(frozen=True)
class ClipDistribution:
    """What the trainer samples clips from."""

    frames: int = 8
    height: int = 8
    width: int = 8
    square: int = 3
    intensity: float = 1.0
    velocities: tuple = ((0, 1), (1, 0), (1, 1), (0, -1), (-1, 0))

    @property
    def latent_dim(self) -> int:
        return self.height * self.width

    def draw(self, rng) -> SyntheticClipSpec:
        v = self.velocities[int(rng.integers(0, len(self.velocities)))]
        seed = int(rng.integers(0, 2**63))
        return SyntheticClipSpec(self.frames, self.height, self.width,
                                 square=self.square, velocity=tuple(v),
                                 intensity=self.intensity, seed=seed)


def draw_mask_type(rng, kinds=("border", "interior")) -> str:
    """Even-odds draw between the two training mask families.

    A single-entry ``kinds`` skips the draw entirely, so restricting the
    family does not shift any later draws in the stream.
    """
    if not kinds or any(k not in ("border", "interior") for k in kinds):
        raise ValueError("kinds must name border and/or interior masks")
    if len(kinds) == 1:
        return kinds[0]
    return "border" if rng.random() < 0.5 else "interior"


def draw_sigma(rng, schedule: NoiseSchedule) -> float:
    """Uniform pick among the schedule's nonzero levels."""
    nz = schedule.levels[:-1]
    return float(nz[int(rng.integers(0, len(nz)))])


@dataclass(eq=False)
class TrainingBatch:
    """Flattened per-frame views, all float64 for the gradient math."""

    clean: np.ndarray  # [T, d]
    noisy: np.ndarray  # [T, d]
    mask: np.ndarray   # [T, d] in {0, 1}
    ctx: np.ndarray    # [T, d] = (1 - M) * clean
    sigma: float


def make_batch(rng, dist: ClipDistribution, schedule: NoiseSchedule,
               kinds=("border", "interior")) -> TrainingBatch:
    """Draw clip, mask, noise level, and noise, in that documented order."""
    clip = make_synthetic_clip(dist.draw(rng))
    if draw_mask_type(rng, kinds) == "border":
        volume = sample_border_mask(rng, dist.height, dist.width, dist.frames)
    else:
        volume = sample_interior_mask(rng, dist.height, dist.width, dist.frames)
    sigma = draw_sigma(rng, schedule)
    eps = rng.standard_normal(clip.shape)
    clean = clip.astype(np.float64).reshape(dist.frames, -1)
    mask = volume.data.astype(np.float64).reshape(dist.frames, -1)
    noisy = clean + sigma * eps.reshape(dist.frames, -1)
    ctx = (1.0 - mask) * clean
    return TrainingBatch(clean, noisy, mask, ctx, sigma)


def dual_loss(pred, target, mask, lam: float = DEFAULT_LAMBDA):
    """Region-weighted squared error, summed over frames and pixels.

    Returns (total, masked term, unmasked term); the total is
    lam * masked + (1 - lam) * unmasked, all accumulated in float64.
    """
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must lie in [0, 1]")
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    m = mask.data if isinstance(mask, MaskVolume) else np.asarray(mask)
    m = m.astype(np.float64)
    if pred.shape != target.shape:
        raise ValueError("prediction and target shapes differ")
    if m.shape != pred.shape:
        raise ValueError("mask shape does not match the frames")
    sq = (pred - target) ** 2
    masked = float(np.sum(m * sq))
    unmasked = float(np.sum((1.0 - m) * sq))
    return lam * masked + (1.0 - lam) * unmasked, masked, unmasked


def one_step_prediction(handle, batch: TrainingBatch, overrides=None,
                        with_cache: bool = False):
    """x_hat = x_t + sigma * f(x_t, M, ctx, sigma), in float64."""
    model = handle.base if hasattr(handle, "base") else handle
    weights = (handle.effective_weights64(overrides)
               if hasattr(handle, "effective_weights64") else None)
    inputs = model.assemble_inputs(batch.noisy, batch.mask, batch.ctx, batch.sigma)
    if with_cache:
        out, cache = model.forward_from_inputs(inputs, weight_override=weights,
                                               with_cache=True)
        return batch.noisy + batch.sigma * out, out, cache, weights
    out = model.forward_from_inputs(inputs, weight_override=weights)
    return batch.noisy + batch.sigma * out


def loss_parts(handle, batch: TrainingBatch, lam: float, overrides=None):
    """(total, masked, unmasked) of the dual loss at the current factors."""
    pred = one_step_prediction(handle, batch, overrides=overrides)
    return dual_loss(pred, batch.clean, batch.mask, lam)


def loss_and_grads(handle, batch: TrainingBatch, lam: float = DEFAULT_LAMBDA):
    """Dual loss plus analytic gradients for every trainable factor.

    Backpropagates d(loss)/d(effective W) through the tanh stack, then maps
    into factor space: dA = scale * B^T dW, dB = scale * dW A^T. Base
    weights and biases get no gradient entries at all.
    """
    if getattr(handle, "merged", False):
        raise ValueError("unmerge the handle before training")
    model = handle.base
    xhat, out, cache, weights = one_step_prediction(handle, batch, with_cache=True)
    losses = dual_loss(xhat, batch.clean, batch.mask, lam)

    wgt = lam * batch.mask + (1.0 - lam) * (1.0 - batch.mask)
    delta = 2.0 * batch.sigma * wgt * (xhat - batch.clean)  # dL/d(out)
    grads: dict[str, np.ndarray] = {}
    for i in range(model.layer_count - 1, -1, -1):
        a_in = cache[i]
        dw = delta.T @ a_in
        ad = handle.adapters.get(i)
        if ad is not None:
            grads[f"layer{i}.A"] = ad.scale * (ad.b.astype(np.float64).T @ dw)
            grads[f"layer{i}.B"] = ad.scale * (dw @ ad.a.astype(np.float64).T)
        if i > 0:
            delta = (delta @ weights[i]) * (1.0 - cache[i] ** 2)
    return losses, grads


def grad_dual_loss(handle, batch: TrainingBatch, lam: float = DEFAULT_LAMBDA):
    """Analytic gradients only (see loss_and_grads)."""
    return loss_and_grads(handle, batch, lam)[1]


def fd_grad_dual_loss(handle, batch: TrainingBatch, lam: float = DEFAULT_LAMBDA,
                      h: float = 1e-3):
    """Central finite-difference gradients over every trainable scalar.

    Perturbs float64 copies of the factors, so the quotient never sees
    float32 quantization. The independent check for loss_and_grads.
    """
    base = {name: arr.astype(np.float64) for name, arr in handle.trainable_params()}
    grads = {}
    for name, arr in base.items():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for j in range(flat.size):
            saved = flat[j]
            flat[j] = saved + h
            up = loss_parts(handle, batch, lam, overrides=base)[0]
            flat[j] = saved - h
            down = loss_parts(handle, batch, lam, overrides=base)[0]
            flat[j] = saved
            gflat[j] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


@dataclass
class TrainConfig:
    steps: int
    lam: float = DEFAULT_LAMBDA
    lr: float = 1e-2
    momentum: float = 0.0
    seed: int = 0
    dist: ClipDistribution = dc_field(default_factory=ClipDistribution)
    schedule: NoiseSchedule = dc_field(
        default_factory=lambda: make_schedule("linear", 1.0, 10))
    mask_kinds: tuple = ("border", "interior")

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError("lambda must lie in [0, 1]")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")
        if not self.mask_kinds or \
                any(k not in ("border", "interior") for k in self.mask_kinds):
            raise ValueError("mask_kinds must name border and/or interior")


@dataclass(eq=False)
class TrainResult:
    curve: list  # (step, total, masked, unmasked)
    final_loss: float


def train(handle, cfg: TrainConfig) -> TrainResult:
    """Plain SGD (optional momentum) on the adapter factors.

    Each step draws a fresh batch from one seeded stream, so a (seed,
    config) pair pins the whole run; identical runs produce bit-identical
    factors. A non-finite loss aborts with the offending step index.
    """
    if handle.latent_dim != cfg.dist.latent_dim:
        raise ValueError("model latent_dim does not match the clip distribution")
    rng = make_rng(cfg.seed)
    params = dict(handle.trainable_params())
    velocity = {name: np.zeros(p.shape, dtype=np.float64) for name, p in params.items()}
    curve = []
    losses = (float("nan"),) * 3
    for step in range(cfg.steps):
        batch = make_batch(rng, cfg.dist, cfg.schedule, cfg.mask_kinds)
        # a diverging run overflows before the finiteness check fires;
        # the explicit raise below is the real signal, not the warnings
        with np.errstate(over="ignore", invalid="ignore"):
            losses, grads = loss_and_grads(handle, batch, cfg.lam)
            if not np.isfinite(losses[0]):
                raise FloatingPointError(f"loss diverged at step {step}")
            for name, g in grads.items():
                p = params[name]
                v = velocity[name]
                v *= cfg.momentum
                v -= cfg.lr * g
                p[:] = (p.astype(np.float64) + v).astype(DTYPE)
        curve.append((step, *losses))
    final = losses[0] if curve else float("nan")
    return TrainResult(curve, final)


def make_eval_batches(seed: int, dist: ClipDistribution, schedule: NoiseSchedule,
                      count: int = 8, kinds=("border", "interior")) -> list:
    """A frozen batch list for comparing models on equal footing."""
    rng = make_rng(seed)
    return [make_batch(rng, dist, schedule, kinds) for _ in range(count)]


def prediction_region_errors(handle, batches) -> tuple[float, float]:
    """Mean per-pixel squared error of the one-step prediction, by region."""
    masked_num = unmasked_num = 0.0
    masked_den = unmasked_den = 0.0
    for batch in batches:
        pred = one_step_prediction(handle, batch)
        sq = (pred - batch.clean) ** 2
        masked_num += float(np.sum(batch.mask * sq))
        unmasked_num += float(np.sum((1.0 - batch.mask) * sq))
        masked_den += float(batch.mask.sum())
        unmasked_den += float((1.0 - batch.mask).sum())
    return masked_num / masked_den, unmasked_num / unmasked_den
