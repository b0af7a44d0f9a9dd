"""Low-rank adapters for the toy denoiser's affine layers.

Each adapted layer computes with W* = W + scale * (B @ A). B starts at
zero, so a freshly attached adapter leaves every forward bit-identical to
the base model. Only A and B are trainable; base weights and biases sit
outside the trainable set, which makes gradient flow to them structurally
impossible rather than merely disabled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DTYPE


@dataclass(eq=False)
class LoraAdapter:
    layer: int
    a: np.ndarray  # (rank, fan_in) float32
    b: np.ndarray  # (fan_out, rank) float32
    scale: float = 1.0

    def __post_init__(self):
        if self.a.ndim != 2 or self.b.ndim != 2:
            raise ValueError("adapter factors must be 2-D")
        if self.a.dtype != DTYPE or self.b.dtype != DTYPE:
            raise ValueError("adapter factors must be float32")
        if self.b.shape[1] != self.a.shape[0]:
            raise ValueError("factor inner dimensions disagree")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.rank > min(self.b.shape[0], self.a.shape[1]):
            raise ValueError("rank exceeds min(fan_out, fan_in)")

    @property
    def rank(self) -> int:
        return self.a.shape[0]

    def delta64(self) -> np.ndarray:
        """B @ A in float64; the update the adapter adds to its layer."""
        return self.b.astype(np.float64) @ self.a.astype(np.float64)


def attach(model, layer_ids, rank: int, rng, scale: float = 1.0):
    """Wrap ``model`` with zero-initialized adapters on the given layers.

    A draws uniform +-1/sqrt(fan_in) from ``rng``; B is zeros. The base
    model object is shared, not copied, and its tensors are not touched.
    """
    rank = int(rank)
    if rank < 1:
        raise ValueError("rank must be >= 1")
    ids = [int(i) for i in layer_ids]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate layer ids")
    adapters = {}
    for i in ids:
        if not (0 <= i < model.layer_count):
            raise ValueError(f"layer {i} out of range 0..{model.layer_count - 1}")
        fan_out, fan_in = model.weights[i].shape
        if rank > min(fan_out, fan_in):
            raise ValueError(f"rank {rank} exceeds layer {i} min dim {min(fan_out, fan_in)}")
        bound = 1.0 / np.sqrt(fan_in)
        a = rng.uniform(-bound, bound, size=(rank, fan_in)).astype(DTYPE)
        b = np.zeros((fan_out, rank), dtype=DTYPE)
        adapters[i] = LoraAdapter(layer=i, a=a, b=b, scale=float(scale))
    return AdaptedDenoiser(model, adapters)


def merge_weight(adapter: LoraAdapter, base_w: np.ndarray) -> np.ndarray:
    """W* = W + scale * (B @ A), accumulated in float64, stored float32."""
    if base_w.shape != (adapter.b.shape[0], adapter.a.shape[1]):
        raise ValueError("base weight shape does not match adapter factors")
    merged = base_w.astype(np.float64) + adapter.scale * adapter.delta64()
    return merged.astype(DTYPE)


class AdaptedDenoiser:
    """A base model plus adapters, with merge/unmerge bookkeeping.

    merge() folds each adapter into its layer weight but retains the
    original float32 array object, so unmerge() restores it bit-identically
    instead of reconstructing it by subtraction.
    """

    reentrant = True

    def __init__(self, base, adapters: dict[int, LoraAdapter]):
        if not adapters:
            raise ValueError("need at least one adapter")
        ranks = {ad.rank for ad in adapters.values()}
        scales = {ad.scale for ad in adapters.values()}
        if len(ranks) != 1 or len(scales) != 1:
            raise ValueError("adapters must share rank and scale")
        for i, ad in adapters.items():
            if ad.layer != i:
                raise ValueError("adapter layer field disagrees with its key")
            if base.weights[i].shape != (ad.b.shape[0], ad.a.shape[1]):
                raise ValueError(f"adapter {i} does not fit its layer")
        self.base = base
        self.adapters = dict(sorted(adapters.items()))
        self.rank = next(iter(ranks))
        self.scale = next(iter(scales))
        self._retained: dict[int, np.ndarray] | None = None

    @property
    def merged(self) -> bool:
        return self._retained is not None

    @property
    def latent_dim(self) -> int:
        return self.base.latent_dim

    def effective_weights64(self, overrides: dict[str, np.ndarray] | None = None):
        """Per-layer float64 weights the forward should use.

        ``overrides`` maps trainable-parameter names to float64 arrays and
        exists so losses can be evaluated at perturbed factors without
        touching float32 storage (the finite-difference path).
        """
        if self.merged:
            if overrides:
                raise ValueError("cannot override factors while merged")
            return [w.astype(np.float64) for w in self.base.weights]
        overrides = overrides or {}
        out = []
        for i, w in enumerate(self.base.weights):
            w64 = w.astype(np.float64)
            ad = self.adapters.get(i)
            if ad is not None:
                a = overrides.get(f"layer{i}.A", ad.a).astype(np.float64)
                b = overrides.get(f"layer{i}.B", ad.b).astype(np.float64)
                w64 = w64 + ad.scale * (b @ a)
            out.append(w64)
        return out

    def forward_batch(self, x, mask, ctx, t) -> np.ndarray:
        override = None if self.merged else self.effective_weights64()
        return self.base.forward_batch(x, mask, ctx, t, weight_override=override)

    def merge(self) -> None:
        if self.merged:
            raise ValueError("already merged")
        retained = {}
        for i, ad in self.adapters.items():
            retained[i] = self.base.weights[i]
            self.base.weights[i] = merge_weight(ad, retained[i])
        self._retained = retained

    def unmerge(self) -> None:
        if not self.merged:
            raise ValueError("not merged")
        for i, original in self._retained.items():
            self.base.weights[i] = original
        self._retained = None

    def trainable_params(self) -> list[tuple[str, np.ndarray]]:
        """Exactly the adapter factors, in layer order, A before B."""
        out = []
        for i, ad in self.adapters.items():
            out.append((f"layer{i}.A", ad.a))
            out.append((f"layer{i}.B", ad.b))
        return out


def trainable_params(handle: AdaptedDenoiser):
    return handle.trainable_params()
