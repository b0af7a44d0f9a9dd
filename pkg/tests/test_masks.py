"""Mask volumes, samplers, and outpaint padding."""

import numpy as np
import pytest

from videoloom.core import make_rng
from videoloom.masks import (
    MaskVolume,
    PadSpec,
    apply_mask,
    border_mask,
    crop_padded,
    interior_mask,
    pad_for_outpaint,
    read_mask_pgm,
    sample_border_mask,
    sample_interior_mask,
    write_mask_pgm,
)


def test_mask_volume_validates_values():
    with pytest.raises(ValueError):
        MaskVolume(np.full((1, 2, 2), 2, np.uint8))
    with pytest.raises(ValueError):
        MaskVolume(np.zeros((2, 2), np.uint8))
    with pytest.raises(ValueError):
        MaskVolume(np.zeros((1, 2, 2), np.uint8), kind="banana")


def test_mask_volume_is_readonly():
    vol = MaskVolume(np.zeros((1, 2, 2), np.uint8))
    with pytest.raises(ValueError):
        vol.data[0, 0, 0] = 1


def test_mask_volume_accessors():
    vol = MaskVolume(np.ones((3, 4, 5), np.uint8))
    assert (vol.frames, vol.height, vol.width) == (3, 4, 5)
    assert vol.masked_fraction() == 1.0


# --- border masks ------------------------------------------------------------

def test_border_mask_alpha_half():
    vol = border_mask(10, 10, 2, 0.5, 0.5)
    assert vol.kind == "border"
    assert vol.masked_fraction() == pytest.approx(0.75)
    # centered 5x5 clear region
    assert (vol.data[0, 2:7, 2:7] == 0).all()
    assert np.array_equal(vol.data[0], vol.data[1])  # static across frames


def test_border_mask_alpha_08():
    vol = border_mask(10, 10, 1, 0.8, 0.8)
    assert vol.masked_fraction() == pytest.approx(0.36)


def test_border_mask_needs_room():
    with pytest.raises(ValueError):
        border_mask(3, 10, 1, 0.5, 0.5)


def test_sampled_border_fraction_bounds():
    rng = make_rng(0)
    for _ in range(1000):
        frac = sample_border_mask(rng, 10, 10, 1).masked_fraction()
        assert 0.36 <= frac <= 0.75


# --- interior masks ----------------------------------------------------------

def test_interior_mask_rect_placement():
    vol = interior_mask(6, 6, 1, [(1, 2, 3, 2)])
    expect = np.zeros((6, 6), np.uint8)
    expect[1:4, 2:4] = 1
    assert np.array_equal(vol.data[0], expect)
    assert vol.kind == "interior"


def test_interior_union_stays_binary():
    vol = interior_mask(6, 6, 1, [(0, 0, 4, 4), (2, 2, 4, 4)])
    assert set(np.unique(vol.data)) <= {0, 1}


def test_single_sampled_rect_respects_area_cap():
    # sides are capped at half the frame, so one rectangle covers <= 1/4
    rng = make_rng(1)
    for _ in range(400):
        vol = interior_mask(
            12, 12, 1,
            [_sample_one_rect(rng, 12, 12)])
        assert vol.masked_fraction() <= 0.25


def _sample_one_rect(rng, height, width):
    h = max(1, int(rng.uniform(0.1, 0.5) * height))
    w = max(1, int(rng.uniform(0.1, 0.5) * width))
    top = int(rng.integers(0, height - h + 1))
    left = int(rng.integers(0, width - w + 1))
    return top, left, h, w


def test_sampled_interior_deterministic():
    a = sample_interior_mask(make_rng(17), 10, 10, 3)
    b = sample_interior_mask(make_rng(17), 10, 10, 3)
    assert np.array_equal(a.data, b.data)
    assert a.masked_fraction() > 0


def test_sampled_interior_differs_across_seeds():
    a = sample_interior_mask(make_rng(1), 10, 10, 1)
    b = sample_interior_mask(make_rng(2), 10, 10, 1)
    assert not np.array_equal(a.data, b.data)


# --- applying ------------------------------------------------------------

def test_apply_mask_identity_and_zero():
    frames = np.random.default_rng(0).random((2, 4, 4)).astype(np.float32)
    clear = MaskVolume(np.zeros((2, 4, 4), np.uint8))
    full = MaskVolume(np.ones((2, 4, 4), np.uint8))
    assert np.array_equal(apply_mask(frames, clear), frames)
    assert (apply_mask(frames, full) == 0).all()


def test_apply_mask_checkerboard():
    frames = np.ones((1, 2, 2), np.float32) * 3.0
    checker = np.array([[[1, 0], [0, 1]]], np.uint8)
    out = apply_mask(frames, MaskVolume(checker))
    assert out[0].tolist() == [[0.0, 3.0], [3.0, 0.0]]


# --- outpaint padding ----------------------------------------------------

def test_pad_counts():
    frames = np.ones((2, 4, 4), np.float32)
    padded, vol = pad_for_outpaint(frames, PadSpec(8, 8, top=2, left=2))
    assert padded.shape == (2, 8, 8)
    assert int((padded[0] == 0).sum()) == 48
    assert int(vol.data[0].sum()) == 48
    assert vol.kind == "border"
    assert (padded[:, 2:6, 2:6] == 1).all()


def test_pad_identity_when_sizes_match():
    frames = np.full((1, 4, 4), 2.0, np.float32)
    padded, vol = pad_for_outpaint(frames, PadSpec(4, 4))
    assert np.array_equal(padded, frames)
    assert vol.data.sum() == 0


def test_pad_zero_offsets_put_source_top_left():
    frames = np.ones((1, 2, 2), np.float32)
    padded, _ = pad_for_outpaint(frames, PadSpec(4, 4, top=0, left=0))
    assert (padded[0, :2, :2] == 1).all()
    assert padded[0, 2:, :].sum() == 0 and padded[0, :, 2:].sum() == 0


def test_crop_inverts_pad():
    frames = np.random.default_rng(3).random((2, 4, 6)).astype(np.float32)
    spec = PadSpec(10, 10, top=3, left=1)
    padded, _ = pad_for_outpaint(frames, spec)
    assert np.array_equal(crop_padded(padded, spec, 4, 6), frames)


@pytest.mark.parametrize("spec", [
    PadSpec(3, 8, top=0, left=0),      # target smaller than source
    PadSpec(8, 8, top=6, left=0),      # source sticks out
])
def test_pad_rejects_impossible_geometry(spec):
    with pytest.raises(ValueError):
        pad_for_outpaint(np.ones((1, 4, 4), np.float32), spec)


def test_pad_spec_rejects_negative_offsets():
    with pytest.raises(ValueError):
        PadSpec(8, 8, top=-1, left=0)


# --- pgm io ---------------------------------------------------------------

def test_mask_pgm_roundtrip(tmp_path):
    vol = interior_mask(6, 6, 3, [(1, 1, 2, 3)])
    path = tmp_path / "m.pgm"
    write_mask_pgm(path, vol)
    back = read_mask_pgm(path, frames=3)
    assert np.array_equal(back.data, vol.data)
    assert back.kind == "user"
    assert back.frames == 3


def test_mask_pgm_threshold_at_128(tmp_path):
    path = tmp_path / "gray.pgm"
    path.write_bytes(b"P5\n2 1\n255\n" + bytes([127, 128]))
    vol = read_mask_pgm(path, frames=1)
    assert vol.data[0].tolist() == [[0, 1]]
