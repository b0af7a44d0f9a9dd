"""PSNR and SSIM scoring, region restriction, and sequence reports."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from videoloom.masks import MaskVolume
from videoloom.metrics import (
    MetricReport,
    evaluate_sequence,
    psnr,
    region_mse,
    region_psnr,
    region_ssim,
    ssim,
    ssim_map,
)


def _checkerboard(n=32):
    return (np.indices((n, n)).sum(axis=0) % 2).astype(np.float64)


# --- psnr --------------------------------------------------------------------

def test_psnr_identity_is_infinite():
    a = np.linspace(0.0, 1.0, 64).reshape(8, 8)
    assert psnr(a, a.copy()) == math.inf


def test_psnr_unit_mse_at_peak_255():
    a = np.zeros((10, 10))
    b = np.ones((10, 10))
    assert psnr(a, b, peak=255.0) == pytest.approx(48.1308, abs=1e-3)


def test_psnr_half_offset_at_unit_peak():
    rng = np.random.default_rng(3)
    a = rng.random((9, 13))
    assert psnr(a, a + 0.5, peak=1.0) == pytest.approx(6.0206, abs=1e-3)


def test_psnr_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


@pytest.mark.parametrize("peak", [0.0, -1.0, math.inf, math.nan])
def test_psnr_rejects_bad_peak(peak):
    a = np.zeros((4, 4))
    with pytest.raises(ValueError):
        psnr(a, a, peak=peak)


def test_psnr_decreases_when_residual_grows():
    rng = np.random.default_rng(4)
    a = rng.random((12, 12))
    r = rng.normal(0.0, 0.1, a.shape)
    assert psnr(a, a + 2.0 * r) < psnr(a, a + r)


def test_psnr_permutation_invariant():
    rng = np.random.default_rng(5)
    a, b = rng.random((8, 8)), rng.random((8, 8))
    perm = rng.permutation(64)
    pa = a.ravel()[perm].reshape(8, 8)
    pb = b.ravel()[perm].reshape(8, 8)
    assert psnr(pa, pb) == psnr(a, b)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_psnr_symmetric_and_peak_shift(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((6, 6)), rng.random((6, 6))
    assert psnr(a, b) == psnr(b, a)
    if math.isfinite(psnr(a, b)):
        shift = psnr(a, b, peak=2.0) - psnr(a, b, peak=1.0)
        assert shift == pytest.approx(20.0 * math.log10(2.0), abs=1e-12)


# --- ssim --------------------------------------------------------------------

def test_ssim_identity_is_exactly_one():
    rng = np.random.default_rng(6)
    a = rng.random((16, 16))
    assert ssim(a, a.copy()) == 1.0


def test_ssim_constant_equal_pair_is_one():
    a = np.full((12, 12), 0.3)
    assert ssim(a, a.copy()) == 1.0


def test_ssim_inverted_checkerboard_scores_low():
    a = _checkerboard()
    assert ssim(a, 1.0 - a) < 0.5
    assert ssim(a, 1.0 - a) >= -1.0


def test_ssim_symmetry():
    rng = np.random.default_rng(7)
    a, b = rng.random((20, 24)), rng.random((20, 24))
    assert abs(ssim(a, b) - ssim(b, a)) <= 1e-12


def test_ssim_flip_invariance():
    rng = np.random.default_rng(8)
    a, b = rng.random((20, 20)), rng.random((20, 20))
    base = ssim(a, b)
    assert ssim(np.flipud(a), np.flipud(b)) == pytest.approx(base, abs=1e-12)
    assert ssim(np.fliplr(a), np.fliplr(b)) == pytest.approx(base, abs=1e-12)
    assert ssim(np.rot90(a), np.rot90(b)) == pytest.approx(base, abs=1e-12)


def test_ssim_rejects_small_frames():
    a = np.zeros((10, 12))
    with pytest.raises(ValueError):
        ssim(a, a)


def test_ssim_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        ssim(np.zeros((12, 12)), np.zeros((12, 13)))


def test_ssim_map_shape_is_valid_window_grid():
    a = np.random.default_rng(9).random((15, 18))
    assert ssim_map(a, a).shape == (5, 8)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_ssim_stays_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((12, 12)), rng.random((12, 12))
    v = ssim(a, b)
    assert -1.0 <= v <= 1.0


def test_ssim_matches_reference_implementation():
    sk = pytest.importorskip("skimage.metrics")
    rng = np.random.default_rng(10)
    for _ in range(4):
        a = rng.random((24, 31))
        b = np.clip(a + rng.normal(0.0, 0.2, a.shape), 0.0, 1.0)
        ref = sk.structural_similarity(
            a, b, win_size=11, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False, data_range=1.0)
        assert ssim(a, b, peak=1.0) == pytest.approx(ref, abs=1e-10)


# --- region restriction ------------------------------------------------------

def test_region_psnr_scores_masked_pixels_only():
    a = np.zeros((8, 8))
    b = np.zeros((8, 8))
    m = np.zeros((8, 8))
    m[:2, :] = 1.0
    b[:2, :] = 0.5  # error only inside the region
    b[5, 5] = 9.0   # large error outside must not count
    assert region_mse(a, b, m) == pytest.approx(0.25)
    assert region_psnr(a, b, m, peak=1.0) == pytest.approx(6.0206, abs=1e-3)


def test_region_psnr_full_mask_matches_plain():
    rng = np.random.default_rng(11)
    a, b = rng.random((9, 9)), rng.random((9, 9))
    assert region_psnr(a, b, np.ones((9, 9))) == psnr(a, b)


def test_region_psnr_empty_region_rejected():
    a = np.zeros((6, 6))
    with pytest.raises(ValueError):
        region_psnr(a, a, np.zeros((6, 6)))


def test_region_ssim_full_mask_matches_plain():
    rng = np.random.default_rng(12)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    assert region_ssim(a, b, np.ones((16, 16))) == ssim(a, b)


def test_region_ssim_keeps_windows_inside_mask():
    rng = np.random.default_rng(13)
    a, b = rng.random((32, 32)), rng.random((32, 32))
    m = np.zeros((32, 32))
    m[4:17, 4:17] = 1.0  # 13x13 block fits 3x3 grid of 11x11 windows
    expect = float(ssim_map(a, b)[4:7, 4:7].mean())
    assert region_ssim(a, b, m) == pytest.approx(expect, abs=1e-15)


def test_region_ssim_without_any_full_window_is_nan():
    a = np.zeros((16, 16))
    m = np.zeros((16, 16))
    m[2:8, 2:8] = 1.0  # 6x6 region cannot contain an 11x11 window
    assert math.isnan(region_ssim(a, a, m))


# --- sequence reports --------------------------------------------------------

def _stack(*frames):
    return np.stack([np.asarray(f, dtype=np.float64) for f in frames])


def test_sequence_identity_report():
    rng = np.random.default_rng(14)
    frames = rng.random((3, 12, 12))
    rep = evaluate_sequence(frames, frames.copy())
    assert isinstance(rep, MetricReport)
    assert rep.frames == 3
    assert rep.ssim_mean == 1.0
    assert rep.psnr_mean == math.inf
    assert rep.psnr_skipped == 3
    assert rep.region == "full"


def test_sequence_mean_is_arithmetic_in_db():
    base = np.zeros((16, 16))
    pred = _stack(base, base)
    ref = _stack(np.full((16, 16), 0.5), np.full((16, 16), 0.25))
    rep = evaluate_sequence(pred, ref)
    p1, p2 = rep.psnr_frames
    assert p1 == pytest.approx(6.0206, abs=1e-3)
    assert p2 == pytest.approx(12.0412, abs=1e-3)
    assert rep.psnr_mean == pytest.approx((p1 + p2) / 2.0, abs=1e-12)


def test_sequence_skips_infinite_frames_in_mean():
    a = np.zeros((16, 16))
    pred = _stack(a, a)
    ref = _stack(a, np.full((16, 16), 0.5))
    rep = evaluate_sequence(pred, ref)
    assert rep.psnr_skipped == 1
    assert rep.psnr_mean == pytest.approx(6.0206, abs=1e-3)


def test_sequence_full_region_matches_unrestricted():
    rng = np.random.default_rng(15)
    pred = rng.random((2, 16, 16))
    ref = rng.random((2, 16, 16))
    plain = evaluate_sequence(pred, ref)
    region = MaskVolume(np.ones((2, 16, 16), dtype=np.float64), kind="user")
    masked = evaluate_sequence(pred, ref, region=region)
    assert masked.psnr_mean == plain.psnr_mean
    assert masked.ssim_mean == plain.ssim_mean
    assert masked.region == "masked"


def test_sequence_tiny_region_reports_nan_ssim():
    rng = np.random.default_rng(16)
    pred = rng.random((1, 16, 16))
    ref = rng.random((1, 16, 16))
    m = np.zeros((1, 16, 16))
    m[0, 3:7, 3:7] = 1.0
    rep = evaluate_sequence(pred, ref, region=MaskVolume(m, kind="user"))
    assert math.isnan(rep.ssim_mean)
    assert math.isfinite(rep.psnr_mean)


def test_sequence_rejects_mismatches():
    a = np.zeros((2, 12, 12))
    with pytest.raises(ValueError):
        evaluate_sequence(a, np.zeros((3, 12, 12)))
    with pytest.raises(ValueError):
        evaluate_sequence(a, a, region=MaskVolume(np.ones((1, 12, 12)), kind="user"))
    with pytest.raises(ValueError):
        evaluate_sequence(np.zeros((12, 12)), np.zeros((12, 12)))
