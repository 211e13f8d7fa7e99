"""End-to-end wiring: audio (or ODF) -> features -> novelty -> boundaries."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import features as ft
from .config import METHOD_LABELS, PipelineConfig
from .errors import TooShortError
from .labeling import SectionLabels, classify_sections
from .novelty import LABELS, NoveltySet, compute_novelty_set
from .onsets import OnsetDetectionFunction, OnsetList, detect_onsets, spectral_flux_odf
from .posterior import GmmModel, PosteriorSequence, fit_gmm, posteriors
from .segmentation import (COMBO1_LABELS, COMBO2_REFERENCE, COMBO2_VOTERS, Segmentation,
                           combo_average, fuse_majority, merge_segments, pick_peaks)
from .signal import AudioBuffer, enhance, resample


@dataclass
class FeatureBundle:
    """Every per-recording track the segmenter and labeler need."""

    duration: float
    odf: OnsetDetectionFunction
    onsets: OnsetList
    rhythmogram: ft.Rhythmogram
    asd: ft.AsdCurve
    posteriors: PosteriorSequence
    gmm: GmmModel
    ste: ft.SteCurve | None = None
    mfcc: ft.MfccMatrix | None = None
    novelty: NoveltySet | None = None

    @property
    def n_frames(self) -> int:
        return len(self.asd.values)

    def save(self, path) -> None:
        arrays = {
            "duration": np.array(self.duration),
            "odf": self.odf.values,
            "onsets": self.onsets.times,
            "rhythmogram": self.rhythmogram.matrix,
            "asd": self.asd.values,
            "posteriors": self.posteriors.matrix,
            "gmm": np.array(self.gmm.to_json()),
        }
        if self.ste is not None:
            arrays["ste"] = self.ste.values
        if self.mfcc is not None:
            arrays["mfcc"] = self.mfcc.matrix
        if self.novelty is not None:
            for lab in LABELS:
                arrays["nf:" + lab] = self.novelty[lab]
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "FeatureBundle":
        with np.load(path, allow_pickle=False) as z:
            nov = None
            if "nf:NF-R" in z:
                nov = NoveltySet({lab: z["nf:" + lab] for lab in LABELS})
            return cls(
                float(z["duration"]),
                OnsetDetectionFunction(z["odf"]),
                OnsetList(z["onsets"]),
                ft.Rhythmogram(z["rhythmogram"]),
                ft.AsdCurve(z["asd"]),
                PosteriorSequence(z["posteriors"]),
                GmmModel.from_json(str(z["gmm"])),
                ft.SteCurve(z["ste"]) if "ste" in z else None,
                ft.MfccMatrix(z["mfcc"]) if "mfcc" in z else None,
                nov,
            )


def extract_features(audio: AudioBuffer | None = None, config: PipelineConfig | None = None,
                     odf: OnsetDetectionFunction | None = None) -> FeatureBundle:
    """Compute all tracks from audio, or from a ready-made ODF alone.

    Without audio the STE and MFCC tracks (and their novelty curves) are
    absent.
    """
    config = config or PipelineConfig()
    if audio is not None:
        if audio.sample_rate != config.sample_rate:
            audio = resample(audio, config.sample_rate)
        duration = audio.duration
        if duration < ft.FRAME_LEN:
            raise TooShortError("recording too short")
        odf = spectral_flux_odf(enhance(audio, config.sample_rate))
    elif odf is not None:
        duration = odf.duration
    else:
        raise ValueError("need audio or an ODF")

    n = ft.grid_length(duration)
    onsets = detect_onsets(odf, config.odf_threshold, config.min_gap)
    rg = ft.rhythmogram(odf)
    rg = ft.Rhythmogram(rg.matrix[:n])
    asd = ft.asd(onsets, duration)
    if n < 10 * config.gmm_k:
        raise TooShortError("recording too short")
    gmm = fit_gmm(rg.matrix, config.gmm_k, config.seed)
    post = posteriors(gmm, rg)

    ste = mfcc = None
    if audio is not None:
        ste = ft.short_time_energy(audio)
        mfcc = ft.mfcc_features(audio)
    bundle = FeatureBundle(duration, odf, onsets, rg, asd, post, gmm, ste, mfcc)
    bundle.novelty = compute_novelty_set(asd, ste, rg, post, mfcc, config.kernel_half_width)
    return bundle


def lead_in_end(onsets, duration: float, min_length: float = 10.0,
                density: float = 0.5, window: float = 10.0) -> float | None:
    """Start of the first sustained stroke stream after an onset-free
    opening, or None when strokes start within ``min_length`` seconds.

    A stream is sustained when the following ``window`` seconds hold at
    least ``density`` strokes per second.
    """
    t = np.asarray(getattr(onsets, "times", onsets), dtype=np.float64)
    need = int(np.ceil(density * window))
    if len(t) < need:
        return None
    counts = np.searchsorted(t, t + window, side="left") - np.arange(len(t))
    ok = np.flatnonzero(counts >= need)
    if ok.size == 0:
        return None
    start = float(t[ok[0]])
    if start < min_length or start > duration - min_length:
        return None
    return start


def candidates(bundle: FeatureBundle, config: PipelineConfig, label: str):
    curve = bundle.novelty.curve(label)
    return pick_peaks(curve, config.threshold_for(label), config.min_interval)


def segment(bundle: FeatureBundle, config: PipelineConfig | None = None,
            method: str | None = None) -> Segmentation:
    """Boundaries for one recording by the chosen novelty method."""
    config = config or PipelineConfig()
    method = method or config.method
    dur = bundle.duration
    if method == "combo2":
        votes = {lab: candidates(bundle, config, lab) for lab in COMBO2_VOTERS}
        ref = candidates(bundle, config, COMBO2_REFERENCE)
        seg = fuse_majority(votes, ref, dur, config.coincidence_window)
    elif method == "combo1":
        curve = combo_average({lab: bundle.novelty[lab] for lab in COMBO1_LABELS})
        peaks = pick_peaks(curve, config.threshold_for("Combo-1"), config.min_interval)
        seg = Segmentation.from_times(peaks.times, dur, config.min_interval)
    elif method in METHOD_LABELS:
        peaks = candidates(bundle, config, METHOD_LABELS[method])
        seg = Segmentation.from_times(peaks.times, dur, config.min_interval)
    else:
        raise ValueError(f"unknown method {method!r}")
    if config.lead_in:
        start = lead_in_end(bundle.onsets, dur, config.min_interval)
        if start is not None:
            near = np.abs(seg.boundaries - start) < config.min_interval
            times = np.sort(np.append(seg.boundaries[~near], start))
            seg = Segmentation.from_times(times, dur, config.min_interval)
    if config.merge:
        seg = merge_segments(seg, bundle.asd, bundle.posteriors, config.merge_asd_threshold)
    return seg


def label(bundle: FeatureBundle, seg: Segmentation) -> SectionLabels:
    return classify_sections(seg, bundle.onsets, bundle.asd, bundle.mfcc)


def feature_key(values: np.ndarray, rate: float, config: PipelineConfig) -> str:
    """Content hash of a signal (audio samples or an ODF) plus the
    feature-relevant settings."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(values, dtype=np.float64).tobytes())
    h.update(repr(float(rate)).encode())
    h.update(json.dumps(config.feature_subset(), sort_keys=True).encode())
    return h.hexdigest()[:24]
