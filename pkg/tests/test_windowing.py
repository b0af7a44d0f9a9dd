"""Window planning, Hamming tapers, and per-step blending."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from videoloom.core import LatentSequence
from videoloom.windowing import (
    blend_windows,
    extract_window,
    hamming_weights,
    plan_windows,
)


def seq_from(rows):
    return LatentSequence(np.asarray(rows, np.float32))


# --- planning --------------------------------------------------------------

def test_plan_10_4_2():
    plan = plan_windows(10, 4, 2)
    assert plan.starts == (1, 3, 5, 7)


def test_plan_T_equals_W():
    assert plan_windows(8, 8, 2).starts == (1,)


def test_plan_clamps_last_start():
    # formula start 9 would end at 12 > 11, clamp to 8
    assert plan_windows(11, 4, 2).starts == (1, 3, 5, 7, 8)


def test_plan_bounds_are_one_based_inclusive():
    plan = plan_windows(10, 4, 2)
    assert plan.bounds() == [(1, 4), (3, 6), (5, 8), (7, 10)]


def test_plan_coverage_counts():
    plan = plan_windows(10, 4, 2)
    counts = plan.coverage_counts()
    assert counts.min() >= 1
    assert counts[0] == 1 and counts[-1] == 1
    assert counts[2] == 2  # frame 3 sits in windows [1..4] and [3..6]


@pytest.mark.parametrize("total,length,overlap", [
    (10, 12, 2),   # window longer than buffer
    (10, 4, 4),    # overlap not < length
    (10, 4, -1),
    (0, 4, 2),
])
def test_plan_rejects_bad_geometry(total, length, overlap):
    with pytest.raises(ValueError):
        plan_windows(total, length, overlap)


@settings(max_examples=200, deadline=None)
@given(
    total=st.integers(1, 200),
    length=st.integers(1, 40),
    overlap=st.integers(0, 39),
)
def test_plan_covers_every_frame(total, length, overlap):
    if length > total or overlap >= length:
        return
    plan = plan_windows(total, length, overlap)
    covered = np.zeros(total, bool)
    for start in plan.starts:
        assert 1 <= start <= total - length + 1
        covered[start - 1:start - 1 + length] = True
    assert covered.all()
    assert plan.starts[-1] + length - 1 == total  # final window touches the end
    assert all(a < b for a, b in zip(plan.starts, plan.starts[1:]))


# --- hamming ---------------------------------------------------------------

def test_hamming_w5_frozen_values():
    w = hamming_weights(5).values
    assert np.allclose(w, [0.08, 0.54, 1.00, 0.54, 0.08], atol=1e-12, rtol=0)


def test_hamming_w2():
    assert np.allclose(hamming_weights(2).values, [0.08, 0.08], atol=1e-12, rtol=0)


def test_hamming_w1_degenerate():
    assert hamming_weights(1).values.tolist() == [1.0]


def test_hamming_rejects_nonpositive():
    with pytest.raises(ValueError):
        hamming_weights(0)


@settings(max_examples=80, deadline=None)
@given(length=st.integers(1, 300))
def test_hamming_symmetry_and_positivity(length):
    w = hamming_weights(length).values
    assert (w > 0).all()
    assert w.max() <= 1.0
    # mirrored construction: symmetry is exact, not approximate
    assert np.array_equal(w, w[::-1])


# --- window extraction -----------------------------------------------------

def test_extract_example():
    seq = seq_from([[0], [1], [2], [3]])
    assert extract_window(seq, 2, 2).tolist() == [[1], [2]]


def test_extract_whole_buffer():
    seq = seq_from([[0], [1], [2], [3]])
    assert np.array_equal(extract_window(seq, 1, 4), seq.buffer)


def test_extract_suffix_matches_brute_copy():
    seq = seq_from(np.arange(12, dtype=np.float32).reshape(6, 2))
    got = extract_window(seq, 4, 3)
    brute = np.stack([seq.buffer[i] for i in (3, 4, 5)])
    assert np.array_equal(got, brute)


def test_extract_returns_copy():
    seq = seq_from([[0], [1], [2], [3]])
    win = extract_window(seq, 1, 2)
    win[0, 0] = 99.0
    assert seq.buffer[0, 0] == 0.0


@pytest.mark.parametrize("start,length", [(0, 2), (4, 2), (1, 5)])
def test_extract_rejects_out_of_range(start, length):
    with pytest.raises(ValueError):
        extract_window(seq_from([[0], [1], [2], [3]]), start, length)


# --- blending --------------------------------------------------------------

def test_blend_hand_example():
    # T=3, W=2, O=1: overlap at frame 2 gets (0.08*3 + 0.08*5)/0.16 = 4
    plan = plan_windows(3, 2, 1)
    weights = hamming_weights(2)
    outputs = [np.array([[1.0], [3.0]], np.float32),
               np.array([[5.0], [7.0]], np.float32)]
    blended = blend_windows(plan, weights, outputs).buffer
    assert blended[:, 0].tolist() == [1.0, 4.0, 7.0]


def test_blend_single_window_bit_exact():
    plan = plan_windows(4, 4, 1)
    out = np.random.default_rng(0).standard_normal((4, 3)).astype(np.float32)
    blended = blend_windows(plan, hamming_weights(4), [out]).buffer
    assert np.array_equal(blended, out)


def test_blend_constant_passthrough_exact():
    plan = plan_windows(11, 4, 2)
    outputs = [np.full((4, 2), 2.5, np.float32) for _ in plan.starts]
    blended = blend_windows(plan, hamming_weights(4), outputs).buffer
    assert (blended == 2.5).all()


def test_blend_requires_one_output_per_window():
    plan = plan_windows(10, 4, 2)
    with pytest.raises(ValueError):
        blend_windows(plan, hamming_weights(4), [np.zeros((4, 1), np.float32)])


@settings(max_examples=100, deadline=None)
@given(
    total=st.integers(2, 60),
    length=st.integers(1, 16),
    overlap=st.integers(0, 15),
    seed=st.integers(0, 2**31 - 1),
)
def test_blend_stays_inside_convex_hull(total, length, overlap, seed):
    if length > total or overlap >= length:
        return
    plan = plan_windows(total, length, overlap)
    rng = np.random.default_rng(seed)
    outputs = [rng.standard_normal((length, 2)).astype(np.float32)
               for _ in plan.starts]
    blended = blend_windows(plan, hamming_weights(length), outputs).buffer
    # per frame, the blend is a convex combination of contributing outputs
    for frame in range(total):
        vals = [out[frame - (s - 1)]
                for s, out in zip(plan.starts, outputs)
                if s - 1 <= frame < s - 1 + length]
        lo = np.min(vals, axis=0) - 1e-5
        hi = np.max(vals, axis=0) + 1e-5
        assert (blended[frame] >= lo).all() and (blended[frame] <= hi).all()
