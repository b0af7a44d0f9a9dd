"""Minimal binary PGM/PPM (P5/P6) image IO.

Frames live in [0, 1] float32 inside the package; files are 8-bit with
maxval 255 on write. Reading accepts any maxval up to 255 and scales.
Color PPM input collapses to grayscale with Rec.601 luma weights.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .core import DTYPE

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


class PnmError(ValueError):
    """Malformed PGM/PPM data."""


def _parse_header(blob: bytes):
    # magic, width, height, maxval separated by whitespace; '#' comments allowed
    pos = 0
    tokens = []
    while len(tokens) < 4:
        if pos >= len(blob):
            raise PnmError("truncated header")
        ch = blob[pos : pos + 1]
        if ch == b"#":
            nl = blob.find(b"\n", pos)
            if nl < 0:
                raise PnmError("unterminated comment")
            pos = nl + 1
        elif ch.isspace():
            pos += 1
        else:
            m = re.match(rb"[^\s#]+", blob[pos:])
            tokens.append(m.group(0))
            pos += len(m.group(0))
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(blob) or not blob[pos : pos + 1].isspace():
        raise PnmError("missing raster separator")
    pos += 1
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise PnmError("non-numeric header field") from None
    if magic not in (b"P5", b"P6"):
        raise PnmError(f"unsupported magic {magic!r}")
    if width < 1 or height < 1:
        raise PnmError("bad image dimensions")
    if not (0 < maxval <= 255):
        raise PnmError(f"unsupported maxval {maxval}")
    return magic, width, height, maxval, pos


def read_image(path) -> np.ndarray:
    """Read one P5/P6 file into a [H, W] float32 array in [0, 1]."""
    blob = Path(path).read_bytes()
    magic, width, height, maxval, pos = _parse_header(blob)
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    raster = blob[pos : pos + need]
    if len(raster) != need:
        raise PnmError(f"raster has {len(raster)} bytes, expected {need}")
    arr = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / maxval
    if channels == 1:
        out = arr.reshape(height, width)
    else:
        out = arr.reshape(height, width, 3) @ _LUMA
    return out.astype(DTYPE)


def write_pgm(path, image) -> None:
    """Write a [H, W] array in [0, 1] as binary PGM, maxval 255."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM writer expects a 2-D image")
    if not np.isfinite(image).all():
        raise ValueError("image contains non-finite values")
    data = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + data.tobytes())


def read_frame_dir(directory) -> np.ndarray:
    """Load every .pgm/.ppm under ``directory`` (sorted by name) as [T, H, W]."""
    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in (".pgm", ".ppm"))
    if not paths:
        raise PnmError(f"no .pgm/.ppm files under {directory}")
    frames = [read_image(p) for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise PnmError(f"frame sizes differ: {sorted(shapes)}")
    return np.stack(frames).astype(DTYPE)


def write_frame_dir(directory, frames) -> list:
    """Write [T, H, W] frames as frame_0000.pgm, frame_0001.pgm, ..."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frames = np.asarray(frames)
    if frames.ndim != 3:
        raise ValueError("expected [T, H, W] frames")
    paths = []
    for i, frame in enumerate(frames):
        p = directory / f"frame_{i:04d}.pgm"
        write_pgm(p, frame)
        paths.append(p)
    return paths
