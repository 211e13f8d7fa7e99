"""Rule-based section labeling: alap, peshkar (Pe), kayada (Ka), GTC.

The alap is found from the absence of strokes (confirmed by timbre).  The
Pe-Ka and Ka-GTC boundaries start at fixed fractions of the post-alap
span and are then moved onto nearby segment boundaries: Pe-Ka to a sharp
drop in stroke density, Ka-GTC to the start of a run of short segments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .features import grid_times
from .segmentation import Segmentation

SECTION_ORDER = ("Alap", "Pe", "Ka", "GTC")

PE_RATIO = 0.3
KA_RATIO = 0.42

ALAP_DENSITY = 0.5
GTC_MAX_SEGMENT = 50.0
GTC_MIN_RUN = 2
GTC_LOOKBACK = 0.25
PE_SEARCH = 0.15
PE_DROP = 3.0
PE_CONTEXT = 10.0


@dataclass
class SectionLabels:
    alap_end: float
    pe_ka: float
    ka_gtc: float
    duration: float
    segments: list  # (start_s, end_s, label)

    def __post_init__(self):
        if not (0 <= self.alap_end <= self.pe_ka <= self.ka_gtc <= self.duration + 1e-9):
            raise ValueError("section boundaries out of order")

    def spans(self) -> list:
        """Contiguous runs of equal labels as (start, end, label)."""
        out = []
        for s, e, lab in self.segments:
            if out and out[-1][2] == lab:
                out[-1] = (out[-1][0], e, lab)
            else:
                out.append((s, e, lab))
        return out

    def to_list(self) -> list:
        return [{"start_s": float(s), "end_s": float(e), "label": lab} for s, e, lab in self.spans()]


def detect_alap(seg: Segmentation, onsets, mfcc=None,
                density_threshold: float = ALAP_DENSITY) -> float:
    """End time of the leading stroke-free segments (0 if the concert opens
    with strokes).

    With ``mfcc`` given, a candidate segment must also sit farther from the
    percussive-region MFCC mean than the RMS spread of percussive frames.
    """
    times = np.asarray(getattr(onsets, "times", onsets), dtype=np.float64)
    segs = seg.segments
    density = np.array([
        (np.searchsorted(times, e, "left") - np.searchsorted(times, s, "left")) / max(e - s, 1e-9)
        for s, e in segs
    ])
    quiet = density < density_threshold

    timbre_ok = np.ones(len(segs), dtype=bool)
    if mfcc is not None:
        m = np.asarray(getattr(mfcc, "matrix", mfcc), dtype=np.float64)
        t = grid_times(len(m))
        owner = np.searchsorted(seg.edges, t, side="right") - 1
        perc = ~quiet[np.clip(owner, 0, len(segs) - 1)]
        if perc.any():
            centre = m[perc].mean(axis=0)
            spread = np.sqrt(((m[perc] - centre) ** 2).sum(axis=1).mean())
            for i in range(len(segs)):
                rows = m[owner == i]
                if len(rows):
                    timbre_ok[i] = np.linalg.norm(rows.mean(axis=0) - centre) > spread

    end = 0.0
    for (s, e), q, ok in zip(segs, quiet, timbre_ok):
        if not (q and ok):
            break
        end = e
    return float(end)


def init_section_boundaries(duration: float, alap_end: float = 0.0,
                            pe_ratio: float = PE_RATIO, ka_ratio: float = KA_RATIO):
    """Initial (Pe-Ka, Ka-GTC) times from average section proportions."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    span = duration - alap_end
    return alap_end + pe_ratio * span, alap_end + (pe_ratio + ka_ratio) * span


def _nearest(values, target):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return None
    return float(values[np.argmin(np.abs(values - target))])


def refine_ka_gtc(seg: Segmentation, ka_gtc0: float, max_segment: float = GTC_MAX_SEGMENT,
                  min_run: int = GTC_MIN_RUN, lookback: float = GTC_LOOKBACK,
                  not_before: float = 0.0) -> float:
    """Move Ka-GTC to the start of the first run of short segments.

    A run is ``min_run`` or more consecutive segments each shorter than
    ``max_segment`` seconds that ends after ``ka_gtc0 - lookback *
    duration``.  Without such a run the initial time snaps to the nearest
    boundary.
    """
    horizon = ka_gtc0 - lookback * seg.duration
    segs = [(s, e) for s, e in seg.segments]
    i = 0
    while i < len(segs):
        if segs[i][1] - segs[i][0] < max_segment:
            j = i
            while j + 1 < len(segs) and segs[j + 1][1] - segs[j + 1][0] < max_segment:
                j += 1
            if j - i + 1 >= min_run and segs[j][1] > horizon and segs[i][0] >= not_before:
                return float(segs[i][0])
            i = j + 1
        else:
            i += 1
    snapped = _nearest(seg.boundaries[seg.boundaries >= not_before], ka_gtc0)
    return ka_gtc0 if snapped is None else snapped


def refine_pe_ka(seg: Segmentation, asd, pe_ka0: float, search: float = PE_SEARCH,
                 drop: float = PE_DROP, context: float = PE_CONTEXT) -> float:
    """Move Pe-Ka to the nearby boundary with a stroke-density drop.

    Candidates are boundaries within ``search * duration`` of ``pe_ka0``
    where mean ASD over the next ``context`` seconds is at least ``drop``
    strokes/s below the previous ``context`` seconds.  The candidate
    closest to ``pe_ka0`` wins; otherwise the nearest boundary inside the
    search window, otherwise ``pe_ka0`` itself.
    """
    a = np.asarray(getattr(asd, "values", asd), dtype=np.float64)
    t = grid_times(len(a))
    reach = search * seg.duration
    near = seg.boundaries[np.abs(seg.boundaries - pe_ka0) <= reach + 1e-9]
    hits = []
    for b in near:
        before = a[(t >= b - context) & (t < b)]
        after = a[(t >= b) & (t < b + context)]
        if len(before) and len(after) and before.mean() - after.mean() >= drop:
            hits.append(b)
    choice = _nearest(hits, pe_ka0)
    if choice is None:
        choice = _nearest(near, pe_ka0)
    return pe_ka0 if choice is None else choice


def label_sections(seg: Segmentation, alap_end: float, pe_ka: float, ka_gtc: float) -> SectionLabels:
    """Label each segment by the region holding its midpoint."""
    out = []
    for s, e in seg.segments:
        mid = 0.5 * (s + e)
        if mid < alap_end:
            lab = "Alap"
        elif mid < pe_ka:
            lab = "Pe"
        elif mid < ka_gtc:
            lab = "Ka"
        else:
            lab = "GTC"
        out.append((float(s), float(e), lab))
    return SectionLabels(float(alap_end), float(pe_ka), float(ka_gtc), seg.duration, out)


def classify_sections(seg: Segmentation, onsets, asd, mfcc=None, **params) -> SectionLabels:
    """Full rule chain: alap detection, initialization, both refinements."""
    alap_end = detect_alap(seg, onsets, mfcc, params.get("alap_density", ALAP_DENSITY))
    if alap_end >= seg.duration:
        raise DegenerateInputError("no percussive content")
    pe0, kg0 = init_section_boundaries(seg.duration, alap_end,
                                       params.get("pe_ratio", PE_RATIO),
                                       params.get("ka_ratio", KA_RATIO))
    pe_ka = refine_pe_ka(seg, asd, pe0, params.get("pe_search", PE_SEARCH),
                         params.get("pe_drop", PE_DROP))
    pe_ka = max(pe_ka, alap_end)
    ka_gtc = refine_ka_gtc(seg, kg0, params.get("gtc_max_segment", GTC_MAX_SEGMENT),
                           params.get("gtc_min_run", GTC_MIN_RUN), not_before=pe_ka)
    ka_gtc = min(max(ka_gtc, pe_ka), seg.duration)
    return label_sections(seg, alap_end, pe_ka, ka_gtc)
