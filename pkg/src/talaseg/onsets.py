"""Spectral-flux onset detection function and stroke onset picking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import get_window

from .signal import EnvelopeSignal

ODF_RATE = 100
FLUX_WINDOW = 0.020

DEFAULT_THRESHOLD = 1.5
DEFAULT_MIN_GAP = 0.030
MEDIAN_WINDOW = 1.0
# onsets must also exceed this fraction of the ODF's 99th percentile, which
# silences median-relative triggering on near-silent stretches
DEFAULT_FLOOR = 0.04

_CHUNK = 8192


@dataclass
class OnsetDetectionFunction:
    values: np.ndarray
    frame_rate: int = ODF_RATE

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def duration(self) -> float:
        return len(self.values) / self.frame_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) / self.frame_rate


@dataclass
class OnsetList:
    times: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("onset times must be strictly increasing")

    def __len__(self):
        return len(self.times)


def spectral_flux_odf(env: EnvelopeSignal, frame_rate: int = ODF_RATE,
                      window: float = FLUX_WINDOW) -> OnsetDetectionFunction:
    """Half-wave rectified spectral flux of the envelope.

    Frame ``t`` is a Hann window centred on ``t / frame_rate`` seconds;
    the signal is edge-padded so a constant envelope has no flux.
    """
    x = np.asarray(env.values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty envelope")
    hop = env.sample_rate // frame_rate
    wlen = int(round(window * env.sample_rate))
    n_frames = -(-len(x) // hop)
    half = wlen // 2
    right = max(0, (n_frames - 1) * hop + wlen - half - len(x))
    xp = np.pad(x, (half, right), mode="edge")
    win = get_window("hann", wlen, fftbins=True)

    odf = np.zeros(n_frames)
    prev = None
    for start in range(0, n_frames, _CHUNK):
        stop = min(n_frames, start + _CHUNK)
        frames = np.lib.stride_tricks.as_strided(
            xp[start * hop:], shape=(stop - start, wlen),
            strides=(xp.strides[0] * hop, xp.strides[0]), writeable=False)
        mag = np.abs(np.fft.rfft(frames * win, axis=1))
        if prev is None:
            diff = np.diff(mag, axis=0)
            odf[start + 1 : stop] = np.maximum(diff, 0.0).sum(axis=1)
        else:
            diff = np.diff(np.vstack([prev, mag]), axis=0)
            odf[start:stop] = np.maximum(diff, 0.0).sum(axis=1)
        prev = mag[-1:]
    return OnsetDetectionFunction(odf, frame_rate)


def detect_onsets(odf: OnsetDetectionFunction, threshold: float = DEFAULT_THRESHOLD,
                  min_gap: float = DEFAULT_MIN_GAP,
                  median_window: float = MEDIAN_WINDOW,
                  floor: float = DEFAULT_FLOOR) -> OnsetList:
    """Pick stroke onsets from an ODF.

    A frame qualifies when it is a local maximum and exceeds ``threshold``
    times the moving median over ``median_window`` seconds.  Qualifying
    frames closer than ``min_gap`` compete; the larger wins, the earlier
    one on ties.  Frames below ``floor`` times the 99th percentile of the
    whole ODF are ignored; being relative, this keeps onset times
    invariant to scaling the ODF.
    """
    if min_gap <= 0 or threshold <= 0:
        raise ValueError("threshold and min_gap must be positive")
    v = odf.values
    n = len(v)
    if n < 3 or not np.any(v > 0):
        return OnsetList(np.zeros(0))

    size = max(1, int(round(median_window * odf.frame_rate)) | 1)
    med = median_filter(v, size=size, mode="nearest")
    left = np.concatenate([[-np.inf], v[:-1]])
    right = np.concatenate([v[1:], [-np.inf]])
    level = floor * np.percentile(v, 99) if floor > 0 else 0.0
    cand = np.flatnonzero((v > left) & (v >= right) & (v > threshold * med) & (v > level) & (v > 0))
    if cand.size == 0:
        return OnsetList(np.zeros(0))

    gap = int(np.ceil(min_gap * odf.frame_rate - 1e-9))
    order = cand[np.lexsort((cand, -v[cand]))]
    blocked = np.zeros(n + 2 * gap, dtype=bool)
    keep = []
    for t in order:
        if blocked[t + gap]:
            continue
        keep.append(t)
        blocked[t + 1 : t + 2 * gap] = True
    keep = np.sort(np.asarray(keep))
    return OnsetList(keep / odf.frame_rate)
