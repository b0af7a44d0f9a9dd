"""Slope fields: an analytic Gaussian oracle and a trainable toy denoiser.

The oracle is the ground truth for solver-order measurements. For data
x0 ~ N(0, v) under variance-exploding noising x_t = x0 + t * eps, the
probability-flow slope under this package's decreasing-t convention is

    f(x, t) = -t * x / (v + t**2)

with the exact trajectory x(t1) = x(t0) * sqrt((v + t1**2) / (v + t0**2)).

The toy denoiser is a small affine-tanh stack over per-frame vectors. Its
input is concat(x, M, (1-M)*x_ctx, log1p(sigma)); its output is a slope
estimate of the same width as x. Parameters are stored float32; forward
math runs in float64 and results are rounded at the public boundary, which
keeps gradient checks well below float32 noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

import numpy as np

from .core import DTYPE, LvtError, make_rng, read_lvt, write_lvt

MAX_TOY_PARAMS = 100_000


@dataclass(frozen=True, eq=False)
class GaussianOracle:
    """Analytic slope field for Gaussian data; usable anywhere a field is."""

    variance: float = 1.0
    reentrant: ClassVar[bool] = True

    def __post_init__(self):
        v = np.asarray(self.variance, dtype=np.float64)
        if not np.isfinite(v).all() or (v <= 0).any():
            raise ValueError("variance must be finite and positive")

    def slope(self, x, t):
        t = float(t)
        if t < 0.0:
            raise ValueError("noise level must be >= 0")
        v = np.asarray(self.variance, dtype=x.dtype if hasattr(x, "dtype") else np.float64)
        return (-t / (v + t * t)) * x

    def __call__(self, x, t):
        return self.slope(x, t)

    def exact(self, x0, t_from, t_to):
        """Closed-form trajectory endpoint from t_from down to t_to."""
        v = np.asarray(self.variance, dtype=np.float64)
        scale = np.sqrt((v + t_to**2) / (v + t_from**2))
        return np.asarray(x0, dtype=np.float64) * scale


def sigma_embedding(t: float) -> float:
    """Noise-level feature handed to the toy net: log1p(sigma)."""
    t = float(t)
    if t < 0.0:
        raise ValueError("noise level must be >= 0")
    return math.log1p(t)


class ToyDenoiser:
    """Per-frame affine-tanh slope estimator with conditioning channels.

    Hidden weights initialize uniform in +-1/sqrt(fan_in) from a seeded
    Philox stream; the output layer starts at zero so an untrained model
    is the zero field. Total parameter count is capped below 1e5.
    """

    nonlinearity = "tanh"
    reentrant = True

    def __init__(self, latent_dim: int, hidden=(48,), seed: int = 0,
                 zero_output: bool = True):
        latent_dim = int(latent_dim)
        if latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        sizes = (3 * latent_dim + 1, *(int(h) for h in hidden), latent_dim)
        if any(s < 1 for s in sizes):
            raise ValueError("layer sizes must be >= 1")
        params = sum(o * i + o for i, o in zip(sizes, sizes[1:]))
        if params >= MAX_TOY_PARAMS:
            raise ValueError(f"{params} parameters exceeds the toy cap {MAX_TOY_PARAMS}")
        self.latent_dim = latent_dim
        self.sizes = sizes
        self.seed = int(seed)
        rng = make_rng(self.seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(DTYPE)
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out, dtype=DTYPE))
        if zero_output:
            self.weights[-1][:] = 0.0

    @property
    def layer_count(self) -> int:
        return len(self.weights)

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def assemble_inputs(self, x, mask, ctx, t) -> np.ndarray:
        """Stack conditioning into the [n, 3d+1] float64 input block."""
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.latent_dim:
            raise ValueError(f"expected [n, {self.latent_dim}] latents, got {x.shape}")
        mask = np.broadcast_to(np.asarray(mask, dtype=np.float64), x.shape)
        ctx = np.broadcast_to(np.asarray(ctx, dtype=np.float64), x.shape)
        col = np.full((x.shape[0], 1), sigma_embedding(t), dtype=np.float64)
        return np.concatenate([x.astype(np.float64), mask, ctx, col], axis=1)

    def forward_from_inputs(self, inputs, weight_override=None, with_cache=False):
        """float64 forward over pre-assembled inputs.

        ``weight_override`` substitutes effective weights (already float64)
        for the stored ones; it is how adapted forwards route through here.
        Returns the output block, plus the per-layer activation cache when
        requested (inputs first, final pre-activation output last).
        """
        if weight_override is None:
            weights = [w.astype(np.float64) for w in self.weights]
        else:
            weights = list(weight_override)
        if len(weights) != self.layer_count:
            raise ValueError("weight override has wrong layer count")
        h = np.asarray(inputs, dtype=np.float64)
        cache = [h]
        last = self.layer_count - 1
        for i, (w, b) in enumerate(zip(weights, self.biases)):
            h = h @ w.T + b.astype(np.float64)
            if i != last:
                h = np.tanh(h)
                cache.append(h)
        cache.append(h)
        return (h, cache) if with_cache else h

    def forward_batch(self, x, mask, ctx, t, weight_override=None) -> np.ndarray:
        """Public slope estimate: float32 [n, d]."""
        inputs = self.assemble_inputs(x, mask, ctx, t)
        out = self.forward_from_inputs(inputs, weight_override=weight_override)
        return out.astype(DTYPE)


class IdentityCodec:
    """Latent space equals pixel space."""

    name = "identity"

    def encode(self, frames):
        return np.asarray(frames, dtype=DTYPE).copy()

    def decode(self, latents):
        return np.asarray(latents, dtype=DTYPE).copy()

    def encode_mask(self, volume):
        return volume

    def latent_shape(self, height: int, width: int):
        return int(height), int(width)


class PooledCodec:
    """2x2 average-pool encoder with nearest-neighbor unpooling."""

    name = "pool2"

    def _check(self, height, width):
        if height % 2 or width % 2:
            raise ValueError("pooled codec needs even spatial extents")

    def encode(self, frames):
        frames = np.asarray(frames, dtype=np.float64)
        t, h, w = frames.shape
        self._check(h, w)
        pooled = frames.reshape(t, h // 2, 2, w // 2, 2).mean(axis=(2, 4))
        return pooled.astype(DTYPE)

    def decode(self, latents):
        latents = np.asarray(latents, dtype=DTYPE)
        return latents.repeat(2, axis=1).repeat(2, axis=2)

    def encode_mask(self, volume):
        from .masks import MaskVolume

        data = volume.data.astype(np.float64)
        t, h, w = data.shape
        self._check(h, w)
        pooled = data.reshape(t, h // 2, 2, w // 2, 2).mean(axis=(2, 4))
        return MaskVolume((pooled >= 0.5).astype(np.uint8), kind=volume.kind)

    def latent_shape(self, height: int, width: int):
        self._check(height, width)
        return height // 2, width // 2


CODECS = {"identity": IdentityCodec, "pool2": PooledCodec}


def make_codec(name: str):
    try:
        return CODECS[name]()
    except KeyError:
        raise ValueError(f"unknown codec {name!r}, expected one of {sorted(CODECS)}") from None


def save_checkpoint(model_or_handle, directory) -> None:
    """Write model (and any adapters) as named LVT tensors plus manifest.json."""
    from .lora import AdaptedDenoiser

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(model_or_handle, AdaptedDenoiser):
        handle = model_or_handle
        model = handle.base
        if handle.merged:
            raise ValueError("unmerge before checkpointing an adapted model")
    else:
        handle = None
        model = model_or_handle
    manifest = {
        "format": "videoloom-checkpoint-v1",
        "model": {
            "latent_dim": model.latent_dim,
            "layer_sizes": list(model.sizes),
            "nonlinearity": model.nonlinearity,
            "seed": model.seed,
        },
        "adapters": None,
    }
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        write_lvt(w, directory / f"layer{i}.W.lvt")
        write_lvt(b, directory / f"layer{i}.b.lvt")
    if handle is not None:
        manifest["adapters"] = {
            "rank": handle.rank,
            "scale": handle.scale,
            "targets": sorted(handle.adapters),
        }
        for i in sorted(handle.adapters):
            ad = handle.adapters[i]
            write_lvt(ad.a, directory / f"layer{i}.A.lvt")
            write_lvt(ad.b, directory / f"layer{i}.B.lvt")
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (directory / "manifest.json").write_text(text)


def load_checkpoint(directory):
    """Rebuild a ToyDenoiser, wrapped in its adapters when the manifest has them."""
    from .lora import AdaptedDenoiser, LoraAdapter

    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise LvtError(f"no manifest.json under {directory}")
    manifest = json.loads(manifest_path.read_text())
    spec = manifest["model"]
    sizes = [int(s) for s in spec["layer_sizes"]]
    hidden = tuple(sizes[1:-1])
    model = ToyDenoiser(spec["latent_dim"], hidden=hidden, seed=spec.get("seed", 0))
    if tuple(sizes) != model.sizes:
        raise LvtError("manifest layer sizes are inconsistent")
    for i in range(model.layer_count):
        w = read_lvt(directory / f"layer{i}.W.lvt")
        b = read_lvt(directory / f"layer{i}.b.lvt")
        if w.shape != model.weights[i].shape or b.shape != model.biases[i].shape:
            raise LvtError(f"layer {i} tensor shape mismatch")
        model.weights[i] = w
        model.biases[i] = b
    ad_spec = manifest.get("adapters")
    if ad_spec is None:
        return model
    adapters = {}
    for i in ad_spec["targets"]:
        a = read_lvt(directory / f"layer{i}.A.lvt")
        b = read_lvt(directory / f"layer{i}.B.lvt")
        adapters[int(i)] = LoraAdapter(layer=int(i), a=a, b=b, scale=float(ad_spec["scale"]))
    return AdaptedDenoiser(model, adapters)
