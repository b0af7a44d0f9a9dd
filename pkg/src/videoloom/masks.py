"""Binary mask volumes for inpaint/outpaint conditioning.

Polarity: 1 marks pixels to synthesize (the hole), 0 marks preserved
context. Masks are static across frames, so samplers draw one 2-D pattern
and replicate it along the frame axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pgm
from .core import DTYPE

MASK_KINDS = ("border", "interior", "user")
PGM_THRESHOLD = 128  # bytes >= this import as 1


@dataclass(frozen=True, eq=False)
class MaskVolume:
    """[frames, height, width] uint8 volume with values in {0, 1}."""

    data: np.ndarray
    kind: str = "user"

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise ValueError(f"kind must be one of {MASK_KINDS}")
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError("mask volume must be [frames, height, width]")
        if data.shape[0] < 1 or data.shape[1] < 1 or data.shape[2] < 1:
            raise ValueError("mask volume has a zero extent")
        if data.dtype != np.uint8:
            uniq = np.unique(data)
            if not np.isin(uniq, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
            data = data.astype(np.uint8)
        elif not np.isin(np.unique(data), (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def masked_fraction(self) -> float:
        return float(self.data.mean(dtype=np.float64))


@dataclass(frozen=True)
class PadSpec:
    """Target canvas and placement for outpainting.

    The source lands with its top-left corner at (top, left) on a zeroed
    ``height`` x ``width`` canvas.
    """

    height: int
    width: int
    top: int = 0
    left: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("target size must be >= 1")
        if self.top < 0 or self.left < 0:
            raise ValueError("offsets must be >= 0")


def _replicate(mask2d: np.ndarray, frames: int, kind: str) -> MaskVolume:
    return MaskVolume(np.broadcast_to(mask2d, (frames, *mask2d.shape)).copy(), kind=kind)


def border_mask(height: int, width: int, frames: int,
                alpha_h: float, alpha_w: float) -> MaskVolume:
    """Deterministic border mask: keep a centered floor(aH) x floor(aW) rect.

    Everything outside the preserved rectangle is hole (1).
    """
    if height < 4 or width < 4:
        raise ValueError("border masks need height and width >= 4")
    if not (0.0 < alpha_h <= 1.0 and 0.0 < alpha_w <= 1.0):
        raise ValueError("alpha fractions must lie in (0, 1]")
    keep_h = int(np.floor(alpha_h * height))
    keep_w = int(np.floor(alpha_w * width))
    if keep_h < 1 or keep_w < 1:
        raise ValueError("preserved rectangle is empty")
    top = (height - keep_h) // 2
    left = (width - keep_w) // 2
    mask = np.ones((height, width), dtype=np.uint8)
    mask[top : top + keep_h, left : left + keep_w] = 0
    return _replicate(mask, frames, "border")


def sample_border_mask(rng, height: int, width: int, frames: int) -> MaskVolume:
    """Border mask with alpha_h, alpha_w ~ U[0.5, 0.8], drawn in that order."""
    alpha_h = float(rng.uniform(0.5, 0.8))
    alpha_w = float(rng.uniform(0.5, 0.8))
    return border_mask(height, width, frames, alpha_h, alpha_w)


def interior_mask(height: int, width: int, frames: int, rects) -> MaskVolume:
    """Deterministic interior mask: union of (top, left, h, w) rectangles."""
    if height < 4 or width < 4:
        raise ValueError("interior masks need height and width >= 4")
    if not rects:
        raise ValueError("need at least one rectangle")
    mask = np.zeros((height, width), dtype=np.uint8)
    for top, left, h, w in rects:
        if h < 1 or w < 1 or top < 0 or left < 0 or top + h > height or left + w > width:
            raise ValueError(f"rectangle {(top, left, h, w)} does not fit")
        mask[top : top + h, left : left + w] = 1
    return _replicate(mask, frames, "interior")


def sample_interior_mask(rng, height: int, width: int, frames: int) -> MaskVolume:
    """1..4 hole rectangles with sides 10-50% of each dimension.

    Draw order per rectangle is (height fraction, width fraction, top,
    left), after a single draw of the rectangle count; tests rely on the
    order for reproducibility.
    """
    if height < 4 or width < 4:
        raise ValueError("interior masks need height and width >= 4")
    count = int(rng.integers(1, 5))
    rects = []
    for _ in range(count):
        h = max(1, int(np.floor(float(rng.uniform(0.1, 0.5)) * height)))
        w = max(1, int(np.floor(float(rng.uniform(0.1, 0.5)) * width)))
        top = int(rng.integers(0, height - h + 1))
        left = int(rng.integers(0, width - w + 1))
        rects.append((top, left, h, w))
    return interior_mask(height, width, frames, rects)


def apply_mask(frames, volume: MaskVolume) -> np.ndarray:
    """Zero out hole pixels: (1 - M) * x."""
    frames = np.asarray(frames, dtype=DTYPE)
    if frames.shape != volume.data.shape:
        raise ValueError(f"frames {frames.shape} vs mask {volume.data.shape}")
    return (frames * (1 - volume.data)).astype(DTYPE)


def pad_for_outpaint(frames, spec: PadSpec):
    """Zero-pad frames onto the target canvas; the pad region becomes the hole.

    Returns (padded frames, border MaskVolume). A target equal to the
    source yields the identity and an all-zero mask.
    """
    frames = np.asarray(frames, dtype=DTYPE)
    if frames.ndim != 3:
        raise ValueError("expected [T, H, W] frames")
    t, h, w = frames.shape
    if spec.height < h or spec.width < w:
        raise ValueError("target canvas is smaller than the source")
    if spec.top + h > spec.height or spec.left + w > spec.width:
        raise ValueError("placement pushes the source off the canvas")
    padded = np.zeros((t, spec.height, spec.width), dtype=DTYPE)
    padded[:, spec.top : spec.top + h, spec.left : spec.left + w] = frames
    mask = np.ones((spec.height, spec.width), dtype=np.uint8)
    mask[spec.top : spec.top + h, spec.left : spec.left + w] = 0
    return padded, _replicate(mask, t, "border")


def crop_padded(frames, spec: PadSpec, height: int, width: int) -> np.ndarray:
    """Inverse of pad_for_outpaint for a known source size."""
    frames = np.asarray(frames)
    if frames.ndim != 3:
        raise ValueError("expected [T, H, W] frames")
    if spec.top + height > frames.shape[1] or spec.left + width > frames.shape[2]:
        raise ValueError("crop region outside the canvas")
    return frames[:, spec.top : spec.top + height, spec.left : spec.left + width].copy()


def read_mask_pgm(path, frames: int) -> MaskVolume:
    """Import a user mask: bytes >= 128 are hole, replicated across frames."""
    blob = pgm.read_image(path)
    mask = (np.rint(blob * 255.0) >= PGM_THRESHOLD).astype(np.uint8)
    return _replicate(mask, frames, "user")


def write_mask_pgm(path, volume: MaskVolume) -> None:
    """Export frame 0 of a (static) mask volume: holes as 255, context as 0."""
    pgm.write_pgm(path, volume.data[0].astype(DTYPE))
