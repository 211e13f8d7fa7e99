"""Rhythm and timbre feature tracks on the shared 0.5 s analysis grid.

Grid frame ``i`` covers the 4 s window ``[0.5 i, 0.5 i + 4)`` and is
stamped with the window centre, ``2 + 0.5 i`` seconds.  Every feature
here produces exactly :func:`grid_length` rows for a recording.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.signal import get_window

from .errors import TooShortError
from .onsets import OnsetDetectionFunction, OnsetList
from .signal import PROCESSING_RATE, AudioBuffer

FRAME_LEN = 4.0
FRAME_HOP = 0.5
MAX_LAG = 2.0

SHORT_WIN = 0.025
SHORT_HOP = 0.005
AVG_WIN = 2.0

N_MELS = 40
N_MFCC = 19
DELTA_WIDTH = 2
N_FFT = 512

_CHUNK = 16384


def grid_length(duration: float) -> int:
    """Number of full 4 s windows at 0.5 s hop that fit in ``duration``."""
    if duration < FRAME_LEN - 1e-9:
        raise TooShortError("recording too short")
    return int(np.floor((duration - FRAME_LEN) / FRAME_HOP + 1e-9)) + 1


def grid_times(n: int) -> np.ndarray:
    return FRAME_LEN / 2 + FRAME_HOP * np.arange(n)


def time_to_frame(t) -> np.ndarray:
    """Nearest grid frame index for a time in seconds (unclipped)."""
    return np.rint((np.asarray(t, dtype=float) - FRAME_LEN / 2) / FRAME_HOP).astype(int)


@dataclass
class Rhythmogram:
    matrix: np.ndarray
    frame_hop: float = FRAME_HOP
    frame_len: float = FRAME_LEN
    lag_rate: int = 100

    @property
    def n_frames(self) -> int:
        return self.matrix.shape[0]

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.matrix.shape[1]) / self.lag_rate

    @property
    def times(self) -> np.ndarray:
        return grid_times(self.n_frames)

    def dominant_lags(self, min_lag: float = 0.05) -> np.ndarray:
        """Shortest lag (s) attaining each row's maximum beyond ``min_lag``."""
        lo = int(round(min_lag * self.lag_rate))
        sub = self.matrix[:, lo:]
        peak = sub.max(axis=1, keepdims=True)
        first = np.argmax(sub >= peak - 1e-9, axis=1)
        return (first + lo) / self.lag_rate


@dataclass
class AsdCurve:
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return grid_times(len(self.values))


@dataclass
class SteCurve:
    values: np.ndarray


@dataclass
class MfccMatrix:
    matrix: np.ndarray


def rhythmogram(odf: OnsetDetectionFunction, frame_len: float = FRAME_LEN,
                hop: float = FRAME_HOP, max_lag: float = MAX_LAG) -> Rhythmogram:
    """Short-time autocorrelation of the ODF.

    Each 4 s window is mean-removed; the ACF is the unbiased estimate
    (lag ``k`` divided by ``W - k``) normalized by lag 0 and clipped to
    [-1, 1].  Windows with no variance give all-zero rows.
    """
    rate = odf.frame_rate
    if odf.duration < frame_len - 1e-9:
        raise TooShortError("recording too short")
    w = int(round(frame_len * rate))
    h = int(round(hop * rate))
    nlag = int(round(max_lag * rate)) + 1
    v = odf.values
    n_rows = (len(v) - w) // h + 1
    frames = np.lib.stride_tricks.as_strided(
        v, shape=(n_rows, w), strides=(v.strides[0] * h, v.strides[0]), writeable=False)
    frames = frames - frames.mean(axis=1, keepdims=True)
    nfft = 1 << int(np.ceil(np.log2(w + nlag)))
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    acf = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, n=nfft, axis=1)[:, :nlag]
    acf /= (w - np.arange(nlag))
    r0 = acf[:, :1]
    scale = np.max(np.abs(v)) ** 2 if v.size else 0.0
    live = r0[:, 0] > 1e-12 * max(scale, 1e-300)
    out = np.zeros_like(acf)
    out[live] = np.clip(acf[live] / r0[live], -1.0, 1.0)
    return Rhythmogram(out, hop, frame_len, rate)


def asd(onsets: OnsetList, duration: float) -> AsdCurve:
    """Onsets per second in each 4 s grid window (start-inclusive)."""
    n = grid_length(duration)
    starts = FRAME_HOP * np.arange(n)
    t = onsets.times
    count = np.searchsorted(t, starts + FRAME_LEN, "left") - np.searchsorted(t, starts, "left")
    return AsdCurve(count / FRAME_LEN)


# ---------------------------------------------------------------------------
# Short-time timbre features


def _short_frames(buf: AudioBuffer):
    """Yield (first_index, frames) chunks of 25 ms frames at 5 ms hop."""
    sr = buf.sample_rate
    wlen = int(round(SHORT_WIN * sr))
    hop = int(round(SHORT_HOP * sr))
    x = buf.samples
    if len(x) < wlen:
        x = np.pad(x, (0, wlen - len(x)))
    n = (len(x) - wlen) // hop + 1
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        yield start, np.lib.stride_tricks.as_strided(
            x[start * hop:], shape=(stop - start, wlen),
            strides=(x.strides[0] * hop, x.strides[0]), writeable=False)


def _short_centers(n_frames: int, sr: int) -> np.ndarray:
    wlen = int(round(SHORT_WIN * sr))
    hop = int(round(SHORT_HOP * sr))
    return (hop * np.arange(n_frames) + wlen / 2) / sr


def grid_average(values: np.ndarray, centers: np.ndarray, duration: float,
                 width: float = AVG_WIN) -> np.ndarray:
    """Mean of the short frames whose centre falls in a ``width`` window
    centred on each grid time."""
    values = np.asarray(values, dtype=np.float64)
    n = grid_length(duration)
    mid = grid_times(n)
    lo = np.searchsorted(centers, mid - width / 2, "left")
    hi = np.searchsorted(centers, mid + width / 2, "left")
    csum = np.concatenate([np.zeros((1,) + values.shape[1:]), np.cumsum(values, axis=0)])
    cnt = np.maximum(hi - lo, 1)
    total = csum[hi] - csum[lo]
    if values.ndim == 1:
        return total / cnt
    return total / cnt[:, None]


def short_time_energy(buf: AudioBuffer) -> SteCurve:
    """Mean-square energy per 25 ms frame, averaged onto the grid."""
    if len(buf.samples) == 0:
        raise ValueError("empty buffer")
    parts = [np.einsum("ij,ij->i", f, f) / f.shape[1] for _, f in _short_frames(buf)]
    e = np.concatenate(parts)
    centers = _short_centers(len(e), buf.sample_rate)
    return SteCurve(grid_average(e, centers, buf.duration))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(sr: int = PROCESSING_RATE, n_fft: int = N_FFT, n_mels: int = N_MELS,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular HTK-style mel filters, shape (n_mels, n_fft // 2 + 1)."""
    fmax = sr / 2 if fmax is None else fmax
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sr / n_fft
    fb = np.zeros((n_mels, len(freqs)))
    for m in range(n_mels):
        lo, c, hi = edges[m : m + 3]
        up = (freqs - lo) / (c - lo)
        down = (hi - freqs) / (hi - c)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def deltas(x: np.ndarray, width: int = DELTA_WIDTH) -> np.ndarray:
    """Regression deltas over +/- ``width`` frames with edge replication."""
    n = len(x)
    xp = np.pad(x, ((width, width), (0, 0)), mode="edge")
    num = np.zeros_like(x, dtype=np.float64)
    for k in range(1, width + 1):
        num += k * (xp[width + k : width + k + n] - xp[width - k : width - k + n])
    return num / (2.0 * sum(k * k for k in range(1, width + 1)))


def mfcc_frames(buf: AudioBuffer) -> np.ndarray:
    """Per-frame 57-dim MFCC + delta + delta-delta (before grid averaging)."""
    if buf.sample_rate != PROCESSING_RATE:
        raise ValueError(f"MFCC expects {PROCESSING_RATE} Hz input")
    fb = mel_filterbank(buf.sample_rate)
    win = None
    ceps = []
    for _, frames in _short_frames(buf):
        if win is None:
            win = get_window("hamming", frames.shape[1], fftbins=True)
        spec = np.fft.rfft(frames * win, n=N_FFT, axis=1)
        power = spec.real ** 2 + spec.imag ** 2
        logmel = np.log(power @ fb.T + 1e-10)
        ceps.append(dct(logmel, type=2, norm="ortho", axis=1)[:, 1 : N_MFCC + 1])
    c = np.vstack(ceps)
    d1 = deltas(c)
    d2 = deltas(d1)
    return np.hstack([c, d1, d2])


def mfcc_features(buf: AudioBuffer) -> MfccMatrix:
    """57-dim MFCC block averaged over 2 s windows at 0.5 s hop."""
    per_frame = mfcc_frames(buf)
    centers = _short_centers(len(per_frame), buf.sample_rate)
    return MfccMatrix(grid_average(per_frame, centers, buf.duration))
