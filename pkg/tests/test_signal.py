import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import solve_toeplitz
from scipy.signal import lfilter

from talaseg.errors import AudioReadError, EmptyAudioError
from talaseg.signal import (AudioBuffer, blockwise_hilbert_envelope, enhance, hilbert_envelope,
                            levinson_durbin, load_audio, lp_residual, resample, write_wav)


# -- load_audio -------------------------------------------------------------

def test_load_16bit_mono(wav_path):
    buf = load_audio(wav_path(np.array([0, 16384, -16384, 0], np.int16), 8000))
    assert buf.sample_rate == 8000
    np.testing.assert_array_equal(buf.samples, [0, 0.5, -0.5, 0])


def test_load_stereo_is_channel_mean(wav_path):
    buf = load_audio(wav_path(np.array([[0.2, 0.4]], np.float32)))
    np.testing.assert_allclose(buf.samples, [0.3], atol=1e-7)


def test_load_empty_data_chunk(wav_path):
    with pytest.raises(EmptyAudioError, match="zero-length audio"):
        load_audio(wav_path(np.zeros(0, np.int16)))


def test_load_missing_and_garbage(tmp_path):
    with pytest.raises(AudioReadError):
        load_audio(tmp_path / "nope.wav")
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a riff file at all")
    with pytest.raises(AudioReadError):
        load_audio(bad)


def test_load_8bit_and_24bit(wav_path, tmp_path):
    buf = load_audio(wav_path(np.array([128, 192, 64], np.uint8), name="u8.wav"))
    np.testing.assert_allclose(buf.samples, [0, 0.5, -0.5])
    # 24-bit: hand-built RIFF so the sample width really is 3 bytes
    vals = [0, 1 << 22, -(1 << 22)]
    raw = b"".join(int(v).to_bytes(3, "little", signed=True) for v in vals)
    fmt = (1).to_bytes(2, "little") + (1).to_bytes(2, "little") + (8000).to_bytes(4, "little") \
        + (24000).to_bytes(4, "little") + (3).to_bytes(2, "little") + (24).to_bytes(2, "little")
    body = b"WAVE" + b"fmt " + len(fmt).to_bytes(4, "little") + fmt + b"data" \
        + len(raw).to_bytes(4, "little") + raw
    path = tmp_path / "s24.wav"
    path.write_bytes(b"RIFF" + len(body).to_bytes(4, "little") + body)
    np.testing.assert_allclose(load_audio(path).samples, [0, 0.5, -0.5])


def test_write_read_roundtrip(tmp_path):
    x = np.sin(np.linspace(0, 20, 1000)) * 0.8
    write_wav(tmp_path / "r.wav", AudioBuffer(x, 16000))
    back = load_audio(tmp_path / "r.wav")
    assert back.sample_rate == 16000
    np.testing.assert_allclose(back.samples, x, atol=2 / 32767)


# -- resample ---------------------------------------------------------------

def test_resample_identity():
    x = np.random.default_rng(0).standard_normal(100) * 0.1
    np.testing.assert_array_equal(resample(AudioBuffer(x, 8000), 8000).samples, x)


def test_resample_keeps_tone_bin():
    t = np.arange(48000) / 48000
    y = resample(AudioBuffer(np.cos(2 * np.pi * 1000 * t), 48000), 16000).samples
    spec = np.abs(np.fft.rfft(y))
    freq = np.argmax(spec) * 16000 / len(y)
    assert abs(freq - 1000) <= 16000 / len(y)


def test_resample_length_contract():
    y = resample(AudioBuffer(np.zeros(441000), 44100), 16000)
    assert abs(len(y.samples) - 160000) <= 1
    assert y.duration == pytest.approx(10.0, abs=1 / 16000)


def test_resample_rejects_zero_rate():
    with pytest.raises(ValueError):
        resample(AudioBuffer(np.zeros(10), 8000), 0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.integers(10, 400), elements=st.floats(-1, 1)),
       st.floats(0.01, 100), st.sampled_from([8000, 22050, 44100]))
def test_resample_linear(x, a, rate):
    y1 = resample(AudioBuffer(a * x, rate), 16000).samples
    y2 = a * resample(AudioBuffer(x, rate), 16000).samples
    np.testing.assert_allclose(y1, y2, rtol=1e-9, atol=1e-12 * a)


# -- Levinson-Durbin and the LP residual ---------------------------------------

def test_levinson_matches_toeplitz_solver():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.standard_normal(400)
        r = np.array([x[: len(x) - k] @ x[k:] for k in range(11)])
        a, err = levinson_durbin(r[None], 10)
        ref = solve_toeplitz(r[:10], r[1:])
        np.testing.assert_allclose(a[0], ref, rtol=1e-8, atol=1e-10)
        assert err[0] == pytest.approx(r[0] - ref @ r[1:], rel=1e-8)


def test_levinson_zero_frame():
    a, err = levinson_durbin(np.zeros((1, 11)), 10)
    assert np.all(a == 0) and err[0] == 0


def test_residual_white_noise_kept():
    x = np.random.default_rng(11).standard_normal(16000 * 2) * 0.1
    e = lp_residual(AudioBuffer(x, 16000))
    assert len(e) == len(x)
    assert (e @ e) / (x @ x) >= 0.9


def test_residual_zeros():
    assert np.all(lp_residual(AudioBuffer(np.zeros(5000), 16000)) == 0)


def test_residual_ar2_exposes_impulses():
    rng = np.random.default_rng(5)
    n = 16000
    drive = rng.standard_normal(n) * 1e-3
    spots = rng.choice(np.arange(500, n - 500), 12, replace=False)
    drive[spots] += 1.0
    # resonant AR(2): poles at radius 0.95, 500 Hz
    r, th = 0.95, 2 * np.pi * 500 / 16000
    x = lfilter([1.0], [1.0, -2 * r * np.cos(th), r * r], drive)
    e = np.abs(lp_residual(AudioBuffer(x / np.abs(x).max(), 16000)))
    med = np.median(e)
    for s in spots:
        assert e[s - 2 : s + 3].max() > 5 * med


def test_residual_frame_energy_bounded():
    rng = np.random.default_rng(8)
    x = lfilter([1.0], [1.0, -1.6, 0.8], rng.standard_normal(16000)) * 0.01
    e = lp_residual(AudioBuffer(x, 16000))
    flen, hop = 480, 240
    for s in range(0, len(x) - flen, hop):
        assert e[s : s + flen] @ e[s : s + flen] <= 1.05 * (x[s : s + flen] @ x[s : s + flen]) + 1e-12


def test_residual_rejects_bad_params():
    buf = AudioBuffer(np.zeros(1000), 16000)
    with pytest.raises(ValueError):
        lp_residual(buf, order=0)
    with pytest.raises(ValueError):
        lp_residual(buf, frame=0.01, hop=0.02)
    with pytest.raises(ValueError):
        lp_residual(buf, order=500)


# -- Hilbert envelope ---------------------------------------------------------

def test_hilbert_cosine_unit_envelope():
    t = np.arange(8000) / 8000
    env = hilbert_envelope(np.cos(2 * np.pi * 50 * t), 8000)
    inner = env[80:-80]
    assert np.max(np.abs(inner - 1)) < 0.02


def test_hilbert_zeros_and_impulse():
    assert np.all(hilbert_envelope(np.zeros(64)) == 0)
    x = np.zeros(101)
    x[37] = 1.0
    assert np.argmax(hilbert_envelope(x)) == 37


def test_hilbert_rejects_nonfinite():
    with pytest.raises(ValueError):
        hilbert_envelope(np.array([0.0, np.nan]))


def test_blockwise_matches_cos_envelope():
    t = np.arange(16000 * 10) / 16000
    env = blockwise_hilbert_envelope(np.cos(2 * np.pi * 300 * t), 16000)
    assert np.max(np.abs(env[1600:-1600] - 1)) < 0.02


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(1, 300), elements=st.floats(-1e3, 1e3)))
def test_envelope_nonnegative(x):
    assert np.all(hilbert_envelope(x) >= 0)
    assert np.all(blockwise_hilbert_envelope(x, 20, block=4.0, overlap=0.25) >= 0)


def test_enhance_length_and_rate():
    x = np.random.default_rng(1).standard_normal(44100) * 0.1
    env = enhance(AudioBuffer(x, 44100))
    assert env.sample_rate == 16000
    assert abs(len(env.values) - 16000) <= 1
    assert np.all(env.values >= 0)
