import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from conftest import asd_oracle, impulse_odf

from talaseg.errors import TooShortError
from talaseg.features import (FRAME_HOP, FRAME_LEN, asd, grid_length, mfcc_features, mfcc_frames,
                              rhythmogram, short_time_energy)
from talaseg.onsets import OnsetDetectionFunction, OnsetList
from talaseg.pipeline import extract_features
from talaseg.signal import AudioBuffer
from talaseg.synthesis import ConcertSpec, SectionSpec, generate_concert

SR = 16000


# -- rhythmogram --------------------------------------------------------------

def test_periodic_impulses_peak_at_multiples():
    rg = rhythmogram(impulse_odf(30, 0.25, offset=0.03))
    assert rg.matrix.shape[1] == 201
    for row in rg.matrix:
        heights = row[[25, 50, 75, 100, 125, 150, 175, 200]]
        assert heights.min() >= 0.95 * heights.max()
        # every multiple is a local maximum of the row
        for k in (25, 50, 75, 100, 125, 150, 175):
            assert row[k] > row[k - 1] and row[k] > row[k + 1]


def test_lag0_and_range():
    v = np.random.default_rng(2).random(1200)
    m = rhythmogram(OnsetDetectionFunction(v)).matrix
    np.testing.assert_allclose(m[:, 0], 1.0)
    assert np.all(np.abs(m) <= 1.0)


def test_zero_odf_gives_zero_rows():
    m = rhythmogram(OnsetDetectionFunction(np.zeros(1000))).matrix
    assert m.shape == (13, 201)
    assert np.all(m == 0)


def test_splice_switches_period():
    v = np.concatenate([impulse_odf(20, 0.5).values, impulse_odf(20, 0.25).values])
    m = rhythmogram(OnsetDetectionFunction(v)).matrix
    n = len(m)
    # rows whose 4 s window lies in the first half peak at 0.5 s only
    splice_row = int(20 / FRAME_HOP)
    first = np.flatnonzero(m[:, 25] >= 0.95 * m[:, 25:].max(axis=1))[0]
    assert abs(first - splice_row) <= 2
    assert np.all(m[: splice_row - int(FRAME_LEN / FRAME_HOP) + 1, 25] < 0.5)
    assert np.all(m[: splice_row - 8, 50] >= 0.999)
    assert np.all(m[splice_row:n, 25] >= 0.95)


def test_rows_count_and_too_short():
    assert rhythmogram(OnsetDetectionFunction(np.zeros(1000))).n_frames == grid_length(10.0)
    assert grid_length(10.0) == 13
    with pytest.raises(TooShortError, match="recording too short"):
        rhythmogram(OnsetDetectionFunction(np.zeros(399)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-4, 1e4))
def test_rhythmogram_scale_invariant(seed, a):
    v = np.random.default_rng(seed).random(700)
    m1 = rhythmogram(OnsetDetectionFunction(v)).matrix
    m2 = rhythmogram(OnsetDetectionFunction(a * v)).matrix
    np.testing.assert_allclose(m1, m2, atol=1e-9)


# -- ASD -------------------------------------------------------------------------

def test_asd_steady_train():
    a = asd(OnsetList(np.arange(600) / 10), 60.0).values
    assert len(a) == grid_length(60.0)
    assert np.all(a[1:-1] == 10.0)


def test_asd_empty():
    a = asd(OnsetList([]), 30.0).values
    assert len(a) == grid_length(30.0) and np.all(a == 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3000), unique=True, max_size=200), st.integers(400, 3000))
def test_asd_matches_brute_force(ticks, dur_ticks):
    # times on a 10 ms grid so window edges are hit exactly
    times = sorted(t / 100 for t in ticks if t < dur_ticks)
    duration = dur_ticks / 100
    got = asd(OnsetList(times), duration).values
    np.testing.assert_array_equal(got, asd_oracle(times, duration))


# -- STE -------------------------------------------------------------------------

def test_ste_silence():
    assert np.all(short_time_energy(AudioBuffer(np.zeros(SR * 6), SR)).values == 0)


def test_ste_step_rises_monotonically():
    x = np.zeros(SR * 20)
    x[SR * 10 :] = 0.5
    v = short_time_energy(AudioBuffer(x, SR)).values
    centres = FRAME_LEN / 2 + FRAME_HOP * np.arange(len(v))
    span = v[(centres >= 9) & (centres <= 11)]
    assert np.all(np.diff(span) >= 0) and span[-1] > span[0]


def test_ste_quadratic_in_amplitude():
    x = np.random.default_rng(4).standard_normal(SR * 6) * 0.1
    a = short_time_energy(AudioBuffer(x, SR)).values
    b = short_time_energy(AudioBuffer(2 * x, SR)).values
    np.testing.assert_allclose(b, 4 * a, rtol=1e-12)


# -- MFCC ------------------------------------------------------------------------

def test_mfcc_separates_noise_from_tone():
    t = np.arange(SR * 8) / SR
    noise = mfcc_features(AudioBuffer(np.random.default_rng(0).standard_normal(len(t)) * 0.1, SR)).matrix
    tone = mfcc_features(AudioBuffer(0.3 * np.sin(2 * np.pi * 200 * t), SR)).matrix
    dist = np.linalg.norm(noise.mean(0) - tone.mean(0))
    spread = max(np.sqrt(((m - m.mean(0)) ** 2).sum(1).mean()) for m in (noise, tone))
    assert dist > 5 * spread


def test_mfcc_constant_input_has_zero_deltas():
    m = mfcc_frames(AudioBuffer(np.full(SR * 2, 0.25), SR))
    assert m.shape[1] == 57
    assert np.all(m[:, 19:] == 0)


def test_mfcc_width_and_rate_check():
    m = mfcc_features(AudioBuffer(np.random.default_rng(1).standard_normal(SR * 5), SR)).matrix
    assert m.shape == (grid_length(5.0), 57)
    with pytest.raises(ValueError):
        mfcc_frames(AudioBuffer(np.zeros(8000), 8000))


def test_grid_alignment_across_features():
    g = generate_concert(ConcertSpec(3, [SectionSpec("Ka", 30.0, 8.0, [1, 1, 2]),
                                         SectionSpec("GTC", 25.3, 14.0, [1])]))
    b = extract_features(g.audio)
    n = grid_length(g.audio.duration)
    assert b.rhythmogram.n_frames == len(b.asd.values) == len(b.ste.values) == len(b.mfcc.matrix) == n
    assert b.posteriors.matrix.shape[0] == n
