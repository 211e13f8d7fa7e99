"""Self-distance matrices, checkerboard kernels and the six novelty curves.

Matrices here hold L2 *distances*, not similarities, so the kernel signs
are flipped relative to the usual similarity formulation: the
(past, past) and (future, future) quadrants are negative and the cross
quadrants positive.  A change point between two internally homogeneous
blocks then gives a positive response.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import grid_times
from .signal import hilbert_envelope

LABELS = ("ASD-D", "STE-D", "NF-RF", "NF-R", "NF-P", "NF-M")
DEFAULT_HALF_WIDTH = 25

_ROW_CHUNK = 16
_T_CHUNK = 256


@dataclass
class NoveltyCurve:
    values: np.ndarray
    label: str

    @property
    def times(self) -> np.ndarray:
        return grid_times(len(self.values))


@dataclass
class NoveltySet:
    curves: dict

    def __post_init__(self):
        lengths = {len(v) for v in self.curves.values()}
        if len(lengths) > 1:
            raise ValueError("novelty curves are not aligned")

    def __getitem__(self, label) -> np.ndarray:
        return self.curves[label]

    def curve(self, label) -> NoveltyCurve:
        return NoveltyCurve(self.curves[label], label)

    @property
    def n_frames(self) -> int:
        return len(next(iter(self.curves.values())))

    @property
    def times(self) -> np.ndarray:
        return grid_times(self.n_frames)


def ssm(seq) -> np.ndarray:
    """Pairwise L2 distance matrix between the rows of ``seq``."""
    x = np.asarray(getattr(seq, "matrix", seq), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if n < 2:
        raise ValueError("need at least two frames")
    d = np.empty((n, n))
    for i in range(0, n, _ROW_CHUNK):
        blk = x[i : i + _ROW_CHUNK]
        diff = x[None, :, :] - blk[:, None, :]
        d[i : i + len(blk)] = np.sqrt((diff * diff).sum(axis=2))
    return d


def checkerboard_kernel(half_width: int) -> np.ndarray:
    """Gaussian-tapered checkerboard of size (2L, 2L), zero-sum, unit L1.

    Sign convention is for distance matrices (see module docstring).
    """
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    L = int(half_width)
    c = np.arange(2 * L) - L + 0.5
    sigma = L / 2.0
    g = np.exp(-(c[:, None] ** 2 + c[None, :] ** 2) / (2 * sigma ** 2))
    side = np.where(c < 0, -1.0, 1.0)
    k = -side[:, None] * side[None, :] * g
    return k / np.abs(k).sum()


def _window_index(n: int, L: int) -> np.ndarray:
    return np.clip(np.arange(n)[:, None] + np.arange(-L, L)[None, :], 0, n - 1)


def novelty_from_ssm(mat, kernel) -> np.ndarray:
    """Correlate ``kernel`` along the main diagonal of a distance matrix.

    The matrix is extended by edge replication, so output frame ``t`` sees
    rows/columns ``t-L .. t+L-1``.  Negative responses are clipped to 0.
    """
    d = np.asarray(mat, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    n = len(d)
    L = k.shape[0] // 2
    if 2 * L > n:
        raise ValueError(f"kernel of size {2 * L} exceeds the {n}-frame matrix")
    idx = _window_index(n, L)
    out = np.empty(n)
    for s in range(0, n, _T_CHUNK):
        ii = idx[s : s + _T_CHUNK]
        block = d[ii[:, :, None], ii[:, None, :]]
        out[s : s + len(ii)] = np.einsum("tab,ab->t", block, k)
    return np.maximum(out, 0.0)


def banded_novelty(seq, kernel) -> np.ndarray:
    """Same as ``novelty_from_ssm(ssm(seq), kernel)`` without the N x N matrix.

    Only distances within the kernel band are evaluated.
    """
    x = np.asarray(getattr(seq, "matrix", seq), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    k = np.asarray(kernel, dtype=np.float64)
    n = len(x)
    L = k.shape[0] // 2
    if 2 * L > n:
        raise ValueError(f"kernel of size {2 * L} exceeds the {n}-frame matrix")
    band = np.zeros((2 * L, n))
    for delta in range(1, 2 * L):
        diff = x[delta:] - x[:-delta]
        band[delta, : n - delta] = np.sqrt((diff * diff).sum(axis=1))
    idx = _window_index(n, L)
    out = np.empty(n)
    for s in range(0, n, _T_CHUNK):
        ii = idx[s : s + _T_CHUNK]
        a, b = ii[:, :, None], ii[:, None, :]
        block = band[np.abs(a - b), np.minimum(a, b)]
        out[s : s + len(ii)] = np.einsum("tab,ab->t", block, k)
    return np.maximum(out, 0.0)


def derivative_novelty(curve) -> np.ndarray:
    """Hilbert envelope of the first difference (difference at t is
    ``x[t] - x[t-1]``, zero at t = 0)."""
    x = np.asarray(getattr(curve, "values", curve), dtype=np.float64)
    if len(x) < 2:
        raise ValueError("need at least two values")
    d = np.concatenate([[0.0], np.diff(x)])
    return hilbert_envelope(d)


def rhythmogram_flux(rg) -> np.ndarray:
    """Hilbert envelope of the frame-to-frame L2 change of the rhythmogram."""
    m = np.asarray(getattr(rg, "matrix", rg), dtype=np.float64)
    if len(m) < 2:
        raise ValueError("need at least two rows")
    diff = np.diff(m, axis=0)
    flux = np.concatenate([[0.0], np.sqrt((diff * diff).sum(axis=1))])
    return hilbert_envelope(flux)


def max_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    peak = v.max() if v.size else 0.0
    return v / peak if peak > 0 else np.zeros_like(v)


def compute_novelty_set(asd, ste, rg, post_seq, mfcc,
                        kernel_half_width: int = DEFAULT_HALF_WIDTH) -> NoveltySet:
    """All six novelty curves, each scaled to a maximum of 1.

    ``ste`` and ``mfcc`` may be ``None`` when only an ODF is available;
    their curves are then zero.
    """
    rgm = np.asarray(getattr(rg, "matrix", rg), dtype=np.float64)
    n = len(rgm)
    tracks = {
        "asd": getattr(asd, "values", asd),
        "ste": getattr(ste, "values", ste),
        "posteriors": getattr(post_seq, "matrix", post_seq),
        "mfcc": getattr(mfcc, "matrix", mfcc),
    }
    for name, arr in tracks.items():
        if arr is not None and len(arr) != n:
            raise ValueError(f"{name} has {len(arr)} frames, rhythmogram has {n}")

    kern = checkerboard_kernel(kernel_half_width)
    zero = np.zeros(n)
    curves = {
        "ASD-D": derivative_novelty(tracks["asd"]),
        "STE-D": derivative_novelty(tracks["ste"]) if tracks["ste"] is not None else zero,
        "NF-RF": rhythmogram_flux(rgm),
        "NF-R": banded_novelty(rgm, kern),
        "NF-P": banded_novelty(tracks["posteriors"], kern),
        "NF-M": banded_novelty(tracks["mfcc"], kern) if tracks["mfcc"] is not None else zero,
    }
    return NoveltySet({lab: max_normalize(curves[lab]) for lab in LABELS})
