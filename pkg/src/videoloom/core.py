"""Array plumbing shared by every other module.

Latents are float32 end to end; reductions that feed back into float32
buffers (blends, losses, metrics) run in float64 first. Tensors travel
between processes in the LVT container, a little-endian binary layout:

    magic "LVT1" | u32 rank | rank x u32 extents | u32 dtype code | payload

dtype code 0 is float32; the payload is row-major with no padding.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DTYPE = np.float32

LVT_MAGIC = b"LVT1"
LVT_F32 = 0
_MAX_RANK = 32


class LvtError(ValueError):
    """A malformed LVT container or a tensor violating its invariants."""


def as_tensor(values, shape=None) -> np.ndarray:
    """Coerce ``values`` to a validated float32 row-major array.

    Rejects rank-0 or empty arrays and non-finite values, the invariants
    every tensor in this package maintains.
    """
    arr = np.ascontiguousarray(values, dtype=DTYPE)
    if shape is not None:
        arr = arr.reshape(shape)
    return validate_tensor(arr)


def validate_tensor(arr) -> np.ndarray:
    if not isinstance(arr, np.ndarray) or arr.dtype != DTYPE:
        raise ValueError("expected a float32 ndarray")
    if arr.ndim == 0 or arr.size == 0:
        raise ValueError("tensor must have rank >= 1 and no zero extent")
    if not np.isfinite(arr).all():
        raise ValueError("tensor contains non-finite values")
    return arr


def write_lvt(arr: np.ndarray, path) -> None:
    """Serialize a float32 tensor; write-side validation enforces invariants."""
    try:
        validate_tensor(arr)
    except ValueError as exc:
        raise LvtError(str(exc)) from None
    if arr.ndim > _MAX_RANK:
        raise LvtError(f"rank {arr.ndim} exceeds container limit {_MAX_RANK}")
    header = struct.pack("<4sI", LVT_MAGIC, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    header += struct.pack("<I", LVT_F32)
    payload = np.ascontiguousarray(arr).astype("<f4", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_lvt(path) -> np.ndarray:
    """Parse an LVT container back into a float32 array, bit-exactly."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != LVT_MAGIC:
        raise LvtError("bad magic")
    (rank,) = struct.unpack_from("<I", blob, 4)
    if rank == 0 or rank > _MAX_RANK:
        raise LvtError(f"bad rank {rank}")
    if len(blob) < 8 + 4 * rank + 4:
        raise LvtError("truncated header")
    extents = struct.unpack_from(f"<{rank}I", blob, 8)
    if any(e == 0 for e in extents):
        raise LvtError("zero extent")
    (code,) = struct.unpack_from("<I", blob, 8 + 4 * rank)
    if code != LVT_F32:
        raise LvtError(f"unknown dtype code {code}")
    offset = 8 + 4 * rank + 4
    count = 1
    for e in extents:
        count *= e
    if len(blob) - offset != 4 * count:
        raise LvtError("payload size does not match extents")
    arr = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(extents)
    arr = arr.astype(DTYPE)  # owns memory, fixes byte order off-platform
    if not np.isfinite(arr).all():
        raise LvtError("payload contains non-finite values")
    return arr


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; equal seeds give equal draws everywhere."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class NoiseSchedule:
    """Strictly decreasing noise levels ending exactly at zero.

    ``levels`` has N + 1 entries for an N-step run; consecutive pairs are
    the per-step (t, t - dt) endpoints handed to a solver.
    """

    levels: tuple[float, ...]

    def __post_init__(self):
        lv = tuple(float(t) for t in self.levels)
        object.__setattr__(self, "levels", lv)
        if len(lv) < 2:
            raise ValueError("schedule needs at least one step")
        if not all(np.isfinite(lv)):
            raise ValueError("schedule contains non-finite levels")
        if lv[0] <= 0.0:
            raise ValueError("schedule must start above zero")
        if lv[-1] != 0.0:
            raise ValueError("schedule must end exactly at zero")
        if any(a <= b for a, b in zip(lv, lv[1:])):
            raise ValueError("schedule levels must strictly decrease")

    @property
    def steps(self) -> int:
        return len(self.levels) - 1

    def gaps(self):
        """Per-step (t, t_next) pairs, in integration order."""
        return list(zip(self.levels[:-1], self.levels[1:]))


def make_schedule(kind: str, t_max: float, steps: int, rho: float = 3.0) -> NoiseSchedule:
    """Build a noise schedule.

    ``linear`` spaces levels evenly; ``power`` applies t_max * ((N-i)/N)**rho,
    a Karras-style taper that still lands exactly on zero.
    """
    t_max = float(t_max)
    steps = int(steps)
    if not np.isfinite(t_max) or t_max <= 0.0:
        raise ValueError("t_max must be finite and positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    ramp = [(steps - i) / steps for i in range(steps + 1)]
    if kind == "linear":
        levels = [t_max * r for r in ramp]
    elif kind == "power":
        rho = float(rho)
        if rho <= 0.0:
            raise ValueError("rho must be positive")
        levels = [t_max * r**rho for r in ramp]
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(tuple(levels))


@dataclass(frozen=True, eq=False)
class LatentSequence:
    """A [frames, dim] float32 buffer, the unit the window machinery slices."""

    buffer: np.ndarray

    def __post_init__(self):
        if not isinstance(self.buffer, np.ndarray) or self.buffer.ndim != 2:
            raise ValueError("latent sequence buffer must be a 2-D ndarray")
        if self.buffer.dtype != DTYPE:
            raise ValueError("latent sequence buffer must be float32")
        if self.buffer.shape[0] < 1 or self.buffer.shape[1] < 1:
            raise ValueError("latent sequence needs frames >= 1 and dim >= 1")
        if not np.isfinite(self.buffer).all():
            raise ValueError("latent sequence contains non-finite values")

    @property
    def frames(self) -> int:
        return self.buffer.shape[0]

    @property
    def dim(self) -> int:
        return self.buffer.shape[1]
