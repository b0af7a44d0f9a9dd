"""PSNR and SSIM reference implementations.

PSNR is 10 log10(peak^2 / MSE) with an infinity sentinel when MSE is zero;
sequence means skip infinite frames and report how many were skipped.

SSIM uses the standard 11x11 Gaussian window (sigma 1.5) with stabilizers
C1 = (0.01 peak)^2 and C2 = (0.03 peak)^2, averaged over valid window
positions only (no padding). Region-restricted scoring keeps a PSNR pixel
when the mask marks it, and an SSIM window only when the mask covers the
window entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .masks import MaskVolume

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


def _gaussian_kernel() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    return k / k.sum()

_KERNEL = _gaussian_kernel()


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; inf when the images match."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must share a shape")
    if not (peak > 0.0) or not math.isfinite(peak):
        raise ValueError("peak must be finite and positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def region_mse(a, b, mask) -> float:
    """Mean squared error over mask==1 pixels only."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m = mask.data if isinstance(mask, MaskVolume) else np.asarray(mask)
    m = m.astype(bool)
    if a.shape != b.shape or m.shape != a.shape:
        raise ValueError("shapes disagree")
    if not m.any():
        raise ValueError("region is empty")
    diff = a[m] - b[m]
    return float(np.mean(diff**2))


def region_psnr(a, b, mask, peak: float = 1.0) -> float:
    if not (peak > 0.0) or not math.isfinite(peak):
        raise ValueError("peak must be finite and positive")
    mse = region_mse(a, b, mask)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _valid_filter(img: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with the shared Gaussian kernel."""
    from numpy.lib.stride_tricks import sliding_window_view

    rows = sliding_window_view(img, SSIM_WINDOW, axis=0) @ _KERNEL
    return sliding_window_view(rows, SSIM_WINDOW, axis=1) @ _KERNEL


def ssim_map(a, b, peak: float = 1.0) -> np.ndarray:
    """Per-position structural similarity over every valid window."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must share a shape")
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be 2-D with both sides >= {SSIM_WINDOW}")
    if not (peak > 0.0) or not math.isfinite(peak):
        raise ValueError("peak must be finite and positive")
    c1 = (_K1 * peak) ** 2
    c2 = (_K2 * peak) ** 2
    mu_a = _valid_filter(a)
    mu_b = _valid_filter(b)
    var_a = _valid_filter(a * a) - mu_a**2
    var_b = _valid_filter(b * b) - mu_b**2
    cov = _valid_filter(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, peak: float = 1.0) -> float:
    """Mean SSIM over valid window positions."""
    return float(ssim_map(a, b, peak).mean())


def region_ssim(a, b, mask, peak: float = 1.0) -> float:
    """Mean SSIM over windows lying entirely inside the mask; nan if none fit."""
    m = mask.data if isinstance(mask, MaskVolume) else np.asarray(mask)
    m = m.astype(np.float64)
    if m.shape != np.asarray(a).shape:
        raise ValueError("mask shape does not match the images")
    smap = ssim_map(a, b, peak)
    from numpy.lib.stride_tricks import sliding_window_view

    ones = np.ones(SSIM_WINDOW, dtype=np.float64)
    rows = sliding_window_view(m, SSIM_WINDOW, axis=0) @ ones
    counts = sliding_window_view(rows, SSIM_WINDOW, axis=1) @ ones
    inside = counts >= SSIM_WINDOW * SSIM_WINDOW - 0.5
    if not inside.any():
        return float("nan")
    return float(smap[inside].mean())


@dataclass(eq=False)
class MetricReport:
    """Per-frame and summary scores for a sequence pair."""

    psnr_frames: list
    ssim_frames: list
    psnr_mean: float
    ssim_mean: float
    frames: int
    psnr_skipped: int  # infinite frames excluded from the mean
    region: str = "full"


def evaluate_sequence(pred, reference, peak: float = 1.0,
                      region: MaskVolume | None = None) -> MetricReport:
    """Score a frame stack against its reference, optionally inside a region.

    PSNR means are arithmetic over per-frame dB values, excluding infinite
    frames (their count is reported). SSIM frames that have no valid window
    (tiny regions) come back nan and are likewise excluded from the mean.
    """
    pred = np.asarray(pred, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if pred.shape != reference.shape:
        raise ValueError("sequences must share a shape")
    if pred.ndim != 3:
        raise ValueError("expected [T, H, W] sequences")
    if region is not None and region.data.shape != pred.shape:
        raise ValueError("region mask does not match the sequences")
    psnr_frames = []
    ssim_frames = []
    for t in range(pred.shape[0]):
        if region is None:
            psnr_frames.append(psnr(pred[t], reference[t], peak))
            ssim_frames.append(ssim(pred[t], reference[t], peak))
        else:
            m = region.data[t]
            psnr_frames.append(region_psnr(pred[t], reference[t], m, peak))
            ssim_frames.append(region_ssim(pred[t], reference[t], m, peak))
    finite = [p for p in psnr_frames if math.isfinite(p)]
    psnr_mean = float(np.mean(finite)) if finite else math.inf
    ssim_ok = [s for s in ssim_frames if not math.isnan(s)]
    ssim_mean = float(np.mean(ssim_ok)) if ssim_ok else float("nan")
    return MetricReport(
        psnr_frames=psnr_frames,
        ssim_frames=ssim_frames,
        psnr_mean=psnr_mean,
        ssim_mean=ssim_mean,
        frames=pred.shape[0],
        psnr_skipped=len(psnr_frames) - len(finite),
        region="masked" if region is not None else "full",
    )
