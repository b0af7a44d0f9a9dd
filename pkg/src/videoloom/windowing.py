"""Sliding-window planning and Hamming-weighted blending.

Frame indices are 1-based in plans so the printed window tables read the
same way the start-index arithmetic is usually written: window i covers
[s_i, s_i + W - 1] with s_i = 1 + (i - 1)(W - O).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DTYPE, LatentSequence

HAMMING_ALPHA = 0.54
HAMMING_BETA = 0.46


@dataclass(frozen=True)
class WindowPlan:
    """Validated window layout over ``total`` frames.

    Construction checks the full contract: strictly increasing starts,
    every window inside [1, total], and every frame covered at least once.
    """

    total: int
    length: int
    overlap: int
    starts: tuple[int, ...]

    def __post_init__(self):
        t, w, o = self.total, self.length, self.overlap
        if not (1 <= w <= t):
            raise ValueError(f"window length {w} must satisfy 1 <= W <= {t}")
        if not (0 <= o < w):
            raise ValueError(f"overlap {o} must satisfy 0 <= O < W")
        if not self.starts:
            raise ValueError("plan has no windows")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("window starts must strictly increase")
        if self.starts[0] < 1 or self.starts[-1] + w - 1 > t:
            raise ValueError("window extends outside the frame range")
        covered = np.zeros(t, dtype=bool)
        for s in self.starts:
            covered[s - 1 : s - 1 + w] = True
        if not covered.all():
            raise ValueError("plan leaves frames uncovered")

    def bounds(self):
        """(start, end) per window, both 1-based inclusive."""
        return [(s, s + self.length - 1) for s in self.starts]

    def coverage_counts(self) -> np.ndarray:
        """How many windows cover each frame."""
        counts = np.zeros(self.total, dtype=np.int64)
        for s in self.starts:
            counts[s - 1 : s - 1 + self.length] += 1
        return counts


def plan_windows(total: int, length: int, overlap: int) -> WindowPlan:
    """Lay out ceil((T-W)/(W-O)) + 1 windows, clamping the last onto the tail.

    The final start is pulled back to T - W + 1 when the stride pattern
    would overrun; a clamp that lands on an existing start is dropped.
    """
    total, length, overlap = int(total), int(length), int(overlap)
    if total < 1:
        raise ValueError("total frames must be >= 1")
    if not (1 <= length <= total):
        raise ValueError(f"window length {length} must satisfy 1 <= W <= T={total}")
    if not (0 <= overlap < length):
        raise ValueError(f"overlap {overlap} must satisfy 0 <= O < W")
    stride = length - overlap
    count = math.ceil((total - length) / stride) + 1
    last_ok = total - length + 1
    starts: list[int] = []
    for i in range(count):
        s = min(1 + i * stride, last_ok)
        if not starts or s > starts[-1]:
            starts.append(s)
    return WindowPlan(total, length, overlap, tuple(starts))


@dataclass(frozen=True, eq=False)
class HammingWeights:
    """Per-frame blend taper for one window; float64, all positive."""

    length: int
    values: np.ndarray


def hamming_weights(length: int) -> HammingWeights:
    """Hamming taper w_j = 0.54 - 0.46 cos(2 pi (j-1)/(W-1)), 1-based j.

    A length-1 window gets the single weight 1.0. The first half is mirrored
    onto the second so w_j == w_{W+1-j} holds exactly, not just to rounding.
    """
    length = int(length)
    if length < 1:
        raise ValueError("window length must be >= 1")
    if length == 1:
        values = np.array([1.0], dtype=np.float64)
    else:
        head = length - length // 2
        j = np.arange(head, dtype=np.float64)
        front = HAMMING_ALPHA - HAMMING_BETA * np.cos(2.0 * np.pi * j / (length - 1))
        values = np.concatenate([front, front[: length // 2][::-1]])
    values.setflags(write=False)
    return HammingWeights(length, values)


def extract_window(seq: LatentSequence, start: int, length: int) -> np.ndarray:
    """Copy frames [start, start + length - 1] (1-based) out of the buffer."""
    start, length = int(start), int(length)
    if length < 1:
        raise ValueError("window length must be >= 1")
    if start < 1 or start + length - 1 > seq.frames:
        raise ValueError(
            f"window [{start}, {start + length - 1}] outside 1..{seq.frames}"
        )
    return seq.buffer[start - 1 : start - 1 + length].copy()


def blend_windows(plan: WindowPlan, weights: HammingWeights, outputs) -> LatentSequence:
    """Normalized weighted overlap-add of per-window outputs.

    Accumulates numerator and denominator in float64, divides once per
    frame, and rounds to float32. Where exactly one window covers a frame
    the division restores the window's value bit-exactly.
    """
    if weights.length != plan.length:
        raise ValueError("weight taper length does not match plan window length")
    if len(outputs) != len(plan.starts):
        raise ValueError(f"expected {len(plan.starts)} window outputs, got {len(outputs)}")
    dim = None
    for out in outputs:
        if not isinstance(out, np.ndarray) or out.ndim != 2:
            raise ValueError("window outputs must be 2-D arrays")
        if out.shape[0] != plan.length:
            raise ValueError("window output has wrong frame count")
        if dim is None:
            dim = out.shape[1]
        elif out.shape[1] != dim:
            raise ValueError("window outputs disagree on latent dim")
        if not np.isfinite(out).all():
            raise ValueError("window output contains non-finite values")
    num = np.zeros((plan.total, dim), dtype=np.float64)
    den = np.zeros(plan.total, dtype=np.float64)
    col = weights.values[:, None]
    for s, out in zip(plan.starts, outputs):
        sl = slice(s - 1, s - 1 + plan.length)
        num[sl] += col * out.astype(np.float64)
        den[sl] += weights.values
    return LatentSequence((num / den[:, None]).astype(DTYPE))
