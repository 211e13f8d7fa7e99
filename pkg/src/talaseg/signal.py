"""Audio loading and the LP-residual / Hilbert-envelope front end.

The onset detector does not look at the waveform directly.  Strokes are
sharpened first by whitening the signal with a short-time linear predictor
and taking the magnitude of the analytic signal of the prediction residual.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window, resample_poly

from .errors import AudioReadError, EmptyAudioError, UnsupportedFormatError

PROCESSING_RATE = 16000

LP_ORDER = 10
LP_FRAME = 0.030
LP_HOP = 0.015

HILBERT_BLOCK = 4.0
HILBERT_OVERLAP = 0.25

_CHUNK_FRAMES = 4096


@dataclass
class AudioBuffer:
    """Mono audio scaled to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono samples only")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        self.sample_rate = int(self.sample_rate)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class EnvelopeSignal:
    """Non-negative magnitude envelope sampled at ``sample_rate``."""

    values: np.ndarray
    sample_rate: int

    @property
    def duration(self) -> float:
        return len(self.values) / self.sample_rate


# ---------------------------------------------------------------------------
# I/O


def _pcm_to_float(data: np.ndarray, bits: int | None) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # scipy left-justifies 24-bit samples into int32
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return np.clip(data.astype(np.float64), -1.0, 1.0)
    raise UnsupportedFormatError(f"unsupported sample type {data.dtype}")


def load_audio(path) -> AudioBuffer:
    """Read a PCM WAV file as a mono :class:`AudioBuffer`.

    Accepts 8/16/24-bit integer and 32-bit float data with one or two
    channels.  Stereo is averaged to mono.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioReadError(f"cannot open {path}")
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        msg = str(exc)
        if "format" in msg.lower() or "compress" in msg.lower():
            raise UnsupportedFormatError(f"{path}: {msg}") from exc
        raise AudioReadError(f"{path}: {msg}") from exc
    except (OSError, EOFError) as exc:
        raise AudioReadError(f"{path}: {exc}") from exc

    if data.ndim == 2:
        if data.shape[1] > 2:
            raise UnsupportedFormatError(f"{path}: {data.shape[1]} channels")
        samples = _pcm_to_float(data, None).mean(axis=1)
    else:
        samples = _pcm_to_float(data, None)
    if samples.size == 0:
        raise EmptyAudioError("zero-length audio")
    if not np.all(np.isfinite(samples)):
        raise AudioReadError(f"{path}: non-finite samples")
    return AudioBuffer(samples, int(rate))


def write_wav(path, buf: AudioBuffer) -> None:
    """Write 16-bit PCM mono."""
    pcm = np.round(np.clip(buf.samples, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(buf.sample_rate)
        fh.writeframes(pcm.tobytes())


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited rational resampling (polyphase Kaiser-windowed sinc)."""
    target_rate = int(target_rate)
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == buf.sample_rate:
        return AudioBuffer(buf.samples.copy(), buf.sample_rate)
    g = gcd(target_rate, buf.sample_rate)
    up, down = target_rate // g, buf.sample_rate // g
    y = resample_poly(buf.samples, up, down)
    return AudioBuffer(y, target_rate)


# ---------------------------------------------------------------------------
# Linear prediction


def levinson_durbin(r: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Solve the autocorrelation normal equations for a batch of frames.

    Parameters
    ----------
    r : ndarray, shape (B, order + 1)
        Autocorrelation lags 0..order per frame.
    order : int

    Returns
    -------
    a : ndarray, shape (B, order)
        Predictor coefficients, ``x[n] ~ sum_k a[k-1] x[n-k]``.
    err : ndarray, shape (B,)
        Final prediction error power.
    """
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    nb = r.shape[0]
    a = np.zeros((nb, order))
    err = r[:, 0].copy()
    live = err > 1e-12 * max(1.0, float(np.max(np.abs(r[:, 0]), initial=0.0)))
    live &= err > 0
    for i in range(order):
        acc = r[:, i + 1] - np.einsum("bj,bj->b", a[:, :i], r[:, i:0:-1]) if i else r[:, 1].copy()
        k = np.zeros(nb)
        np.divide(acc, err, out=k, where=live)
        k = np.clip(k, -1.0, 1.0)
        prev = a[:, :i].copy()
        a[:, :i] = prev - k[:, None] * prev[:, ::-1]
        a[:, i] = k
        err = err * (1.0 - k * k)
        live &= err > 1e-12 * r[:, 0]
    return a, err


def _frame_view(x: np.ndarray, length: int, hop: int, n_frames: int) -> np.ndarray:
    return np.lib.stride_tricks.as_strided(
        x, shape=(n_frames, length), strides=(x.strides[0] * hop, x.strides[0]), writeable=False
    )


def lp_residual(buf: AudioBuffer, order: int = LP_ORDER, frame: float = LP_FRAME,
                hop: float = LP_HOP) -> np.ndarray:
    """Short-time LP residual assembled by windowed overlap-add.

    Each Hann-windowed frame gets its own autocorrelation-method predictor;
    the inverse filter is applied to the raw samples (with true history)
    and the outputs are cross-faded with the same window, normalized by
    the window overlap sum.  Frames whose autocorrelation is singular pass
    the input through unchanged.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not frame > hop > 0:
        raise ValueError("need frame > hop > 0")
    flen = int(round(frame * buf.sample_rate))
    fhop = int(round(hop * buf.sample_rate))
    if flen < order + 1:
        raise ValueError(f"frame of {flen} samples is shorter than order + 1")

    x = buf.samples
    n = len(x)
    win = get_window("hann", flen, fftbins=True)
    # left: flen of padding plus `order` samples of filter history
    lead = flen + order
    xp = np.concatenate([np.zeros(lead), x, np.zeros(2 * flen)])
    n_frames = (n + 2 * flen - flen) // fhop + 1
    out = np.zeros(n + 3 * flen)
    wsum = np.zeros(n + 3 * flen)

    for start in range(0, n_frames, _CHUNK_FRAMES):
        stop = min(n_frames, start + _CHUNK_FRAMES)
        nb = stop - start
        seg = _frame_view(xp[start * fhop:], flen + order, fhop, nb)
        raw = seg[:, order:]
        xw = raw * win
        r = np.empty((nb, order + 1))
        for k in range(order + 1):
            r[:, k] = np.einsum("bi,bi->b", xw[:, : flen - k], xw[:, k:])
        a, _ = levinson_durbin(r, order)
        res = raw.copy()
        for k in range(1, order + 1):
            res -= a[:, k - 1 : k] * seg[:, order - k : order - k + flen]
        res *= win
        for j in range(nb):
            s = (start + j) * fhop
            out[s : s + flen] += res[j]
            wsum[s : s + flen] += win
    out = out[flen : flen + n]
    wsum = wsum[flen : flen + n]
    good = wsum > 1e-8
    result = np.zeros(n)
    result[good] = out[good] / wsum[good]
    return result


# ---------------------------------------------------------------------------
# Analytic signal


def hilbert_envelope(x, rate: float | None = None) -> np.ndarray:
    """Magnitude of the analytic signal of ``x``.

    Built in the frequency domain: negative frequencies zeroed, positive
    ones doubled, DC and Nyquist kept.  ``rate`` is accepted for symmetry
    with the other signal ops and does not change the result.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    n = len(x)
    if n == 0:
        return np.zeros(0)
    spec = np.fft.fft(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1 : n // 2] = 2.0
    else:
        h[1 : (n + 1) // 2] = 2.0
    return np.abs(np.fft.ifft(spec * h))


def blockwise_hilbert_envelope(x, rate: int, block: float = HILBERT_BLOCK,
                               overlap: float = HILBERT_OVERLAP) -> np.ndarray:
    """Hilbert envelope over fixed blocks, cross-faded across the overlaps."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    blen = int(round(block * rate))
    olen = int(round(overlap * rate))
    if n <= blen:
        return hilbert_envelope(x)
    step = blen - olen
    out = np.zeros(n)
    wsum = np.zeros(n)
    ramp = (np.arange(olen) + 0.5) / olen if olen else np.zeros(0)
    start = 0
    while True:
        stop = min(n, start + blen)
        env = hilbert_envelope(x[start:stop])
        w = np.ones(stop - start)
        if start > 0 and olen:
            w[:olen] = ramp
        if stop < n and olen:
            w[-olen:] = np.minimum(w[-olen:], ramp[::-1])
        out[start:stop] += w * env
        wsum[start:stop] += w
        if stop == n:
            break
        start += step
    return out / wsum


def enhance(buf: AudioBuffer, rate: int = PROCESSING_RATE) -> EnvelopeSignal:
    """Resample, whiten with the LP residual and take its Hilbert envelope."""
    if buf.sample_rate != rate:
        buf = resample(buf, rate)
    res = lp_residual(buf)
    return EnvelopeSignal(blockwise_hilbert_envelope(res, rate), rate)
