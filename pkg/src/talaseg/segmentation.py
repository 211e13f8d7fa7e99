"""Peak picking, novelty fusion and post-processing merge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FRAME_HOP, grid_times
from .novelty import NoveltyCurve, max_normalize

MIN_INTERVAL = 10.0
COINCIDENCE_WINDOW = 5.0
MERGE_ASD_THRESHOLD = 3.0

COMBO1_LABELS = ("ASD-D", "NF-R", "NF-P")
COMBO2_VOTERS = ("ASD-D", "NF-RF", "NF-R")
COMBO2_REFERENCE = "NF-P"


@dataclass
class BoundaryCandidates:
    times: np.ndarray
    scores: np.ndarray
    source_label: str = ""

    def __len__(self):
        return len(self.times)


@dataclass
class Segmentation:
    """Interior boundaries of ``[0, duration]``."""

    boundaries: np.ndarray
    duration: float

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.float64).reshape(-1)
        if b.size and (b[0] <= 0 or b[-1] >= self.duration or np.any(np.diff(b) <= 0)):
            raise ValueError("boundaries must be strictly increasing inside (0, duration)")
        self.boundaries = b
        self.duration = float(self.duration)

    @classmethod
    def from_times(cls, times, duration, min_length: float = MIN_INTERVAL) -> "Segmentation":
        """Sort, and drop times that would leave an edge segment shorter
        than ``min_length``."""
        t = np.unique(np.asarray(times, dtype=np.float64))
        t = t[(t >= min_length) & (t <= duration - min_length)]
        return cls(t, duration)

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[0.0], self.boundaries, [self.duration]])

    @property
    def segments(self) -> list:
        e = self.edges
        return list(zip(e[:-1], e[1:]))

    def __len__(self):
        return len(self.boundaries) + 1


def pick_peaks(nf, threshold: float = 0.1, min_interval: float = MIN_INTERVAL,
               frame_hop: float = FRAME_HOP) -> BoundaryCandidates:
    """Local maxima above ``threshold``, accepted greedily by score while
    keeping every pair at least ``min_interval`` seconds apart."""
    label = getattr(nf, "label", "")
    v = np.asarray(getattr(nf, "values", nf), dtype=np.float64)
    n = len(v)
    if n == 0:
        return BoundaryCandidates(np.zeros(0), np.zeros(0), label)
    left = np.concatenate([[-np.inf], v[:-1]])
    right = np.concatenate([v[1:], [-np.inf]])
    cand = np.flatnonzero((v > left) & (v >= right) & (v > threshold))
    gap = int(np.ceil(min_interval / frame_hop - 1e-9))
    order = cand[np.lexsort((cand, -v[cand]))]
    taken = np.zeros(n + 2 * gap, dtype=bool)
    keep = []
    for t in order:
        if taken[t + gap]:
            continue
        keep.append(t)
        taken[t + 1 : t + 2 * gap] = True
    keep = np.sort(np.asarray(keep, dtype=int))
    times = grid_times(n)[keep] if keep.size else np.zeros(0)
    return BoundaryCandidates(times, v[keep] if keep.size else np.zeros(0), label)


def combo_average(nfs: dict) -> NoveltyCurve:
    """Mean of ASD-D, NF-R and NF-P, rescaled to a maximum of 1."""
    if set(nfs) != set(COMBO1_LABELS):
        raise ValueError(f"combo average needs exactly {COMBO1_LABELS}, got {sorted(nfs)}")
    stack = np.vstack([np.asarray(getattr(nfs[k], "values", nfs[k]), float) for k in COMBO1_LABELS])
    return NoveltyCurve(max_normalize(stack.mean(axis=0)), "Combo-1")


def fuse_majority(candidates: dict, reference: BoundaryCandidates, duration: float,
                  coincidence_window: float = COINCIDENCE_WINDOW,
                  min_votes: int = 2) -> Segmentation:
    """Keep reference peaks that at least ``min_votes`` of the voting
    curves corroborate within +/- ``coincidence_window`` seconds."""
    accepted = []
    for t in reference.times:
        votes = sum(
            1 for c in candidates.values()
            if len(c) and np.min(np.abs(np.asarray(c.times) - t)) <= coincidence_window + 1e-9
        )
        if votes >= min_votes:
            accepted.append(t)
    return Segmentation.from_times(accepted, duration)


def _segment_frames(seg: Segmentation, n_frames: int) -> list:
    t = grid_times(n_frames)
    e = seg.edges
    idx = np.searchsorted(e, t, side="right") - 1
    return [np.flatnonzero(idx == s) for s in range(len(e) - 1)]


def _modal_class(classes: np.ndarray, k: int) -> int:
    return int(np.argmax(np.bincount(classes, minlength=k)))


def merge_segments(seg: Segmentation, asd, post_seq,
                   asd_threshold: float = MERGE_ASD_THRESHOLD) -> Segmentation:
    """Drop boundaries between rhythmically indistinguishable neighbours.

    Neighbours merge when their mean ASD differs by less than
    ``asd_threshold`` strokes/s and their most frequent posterior class is
    the same.  The scan runs left to right and repeats until nothing
    changes.
    """
    a = np.asarray(getattr(asd, "values", asd), dtype=np.float64)
    p = np.asarray(getattr(post_seq, "matrix", post_seq), dtype=np.float64)
    if len(a) != len(p):
        raise ValueError("ASD and posteriors are on different grids")
    classes = np.argmax(p, axis=1)
    k = p.shape[1]
    bounds = list(seg.boundaries)
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(bounds):
            cur = Segmentation(np.asarray(bounds), seg.duration)
            frames = _segment_frames(cur, len(a))
            fa, fb = frames[i], frames[i + 1]
            if len(fa) and len(fb):
                close = abs(a[fa].mean() - a[fb].mean()) < asd_threshold
                if close and _modal_class(classes[fa], k) == _modal_class(classes[fb], k):
                    del bounds[i]
                    changed = True
                    continue
            i += 1
    return Segmentation(np.asarray(bounds), seg.duration)
