"""Synthetic solo-percussion concerts with exact ground truth.

A concert is a sequence of compositions.  Each composition lays strokes
on a repeating inter-onset-interval template scaled to a target stroke
density; density multipliers, pauses and spoken-recitation stand-ins
(steady band-limited noise, no strokes) can be scheduled inside it.
Rendering produces either audio (decaying band-passed noise bursts, two
stroke colours) or the ideal impulse ODF at 100 Hz.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import butter, sosfilt

from .evaluation import GroundTruth
from .onsets import ODF_RATE, OnsetDetectionFunction
from .signal import PROCESSING_RATE, AudioBuffer

JITTER = 0.005
SECTION_LABELS = ("Alap", "Pe", "Ka", "GTC")

PATTERNS = (
    (1,),
    (1, 1, 2),
    (2, 1, 1),
    (1, 2),
    (1, 1, 1, 3),
    (3, 1, 1, 1),
    (1, 1, 2, 2),
    (2, 1, 2, 1, 1, 1),
)
MIN_IOI = 0.045
PE_DENSITY = (4.0, 6.5)
KA_DENSITY = (7.0, 15.0)
GTC_DENSITY = (9.5, 19.5)
PE_STEP = 5.0


@dataclass
class SectionSpec:
    """One composition (or the alap) inside a concert."""

    label: str
    duration_s: float
    base_density: float = 0.0
    pattern: list = field(default_factory=lambda: [1])
    speed_steps: list = field(default_factory=list)  # (offset_s, multiplier)
    pauses: list = field(default_factory=list)  # (offset_s, length_s)
    recitation_inserts: list = field(default_factory=list)  # (offset_s, length_s)
    # probability of a low stroke, drawn per stroke; None alternates the
    # two colours by pattern position
    stroke_mix: float | None = None

    def density_at(self, offset: float) -> float:
        mult = 1.0
        for when, m in sorted(self.speed_steps):
            if offset >= when:
                mult = m
        return self.base_density * mult


@dataclass
class ConcertSpec:
    seed: int
    sections: list
    render_mode: str = "audio"
    sample_rate: int = PROCESSING_RATE

    def __post_init__(self):
        self.sections = [s if isinstance(s, SectionSpec) else SectionSpec(**s) for s in self.sections]

    @property
    def duration(self) -> float:
        return float(sum(s.duration_s for s in self.sections))

    def validate(self) -> None:
        if self.render_mode not in ("audio", "odf"):
            raise ValueError(f"render_mode must be 'audio' or 'odf', not {self.render_mode!r}")
        if not self.sections:
            raise ValueError("a concert needs at least one section")
        for s in self.sections:
            if s.label not in SECTION_LABELS:
                raise ValueError(f"unknown section label {s.label!r}")
            if not s.duration_s > 0:
                raise ValueError("section durations must be positive")
            if s.stroke_mix is not None and not 0 <= s.stroke_mix <= 1:
                raise ValueError("stroke_mix must lie in [0, 1]")
            if s.base_density < 0 or any(m < 0 for _, m in s.speed_steps):
                raise ValueError("densities must be non-negative")
            if not s.pattern or any(p <= 0 for p in s.pattern):
                raise ValueError("pattern entries must be positive")
            for off, length in list(s.pauses) + list(s.recitation_inserts):
                if off < 0 or length <= 0 or off + length > s.duration_s + 1e-9:
                    raise ValueError("pauses and inserts must lie inside their section")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "render_mode": self.render_mode,
            "sample_rate": self.sample_rate,
            "sections": [asdict(s) for s in self.sections],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ConcertSpec":
        secs = []
        for s in d["sections"]:
            s = dict(s)
            for key in ("speed_steps", "pauses", "recitation_inserts"):
                s[key] = [tuple(x) for x in s.get(key, [])]
            secs.append(SectionSpec(**s))
        return cls(int(d["seed"]), secs, d.get("render_mode", "audio"),
                   int(d.get("sample_rate", PROCESSING_RATE)))

    @classmethod
    def from_json(cls, text: str) -> "ConcertSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class GeneratedConcert:
    spec: ConcertSpec
    truth: GroundTruth
    onsets: np.ndarray
    accents: np.ndarray
    audio: AudioBuffer | None = None
    odf: OnsetDetectionFunction | None = None


# ---------------------------------------------------------------------------
# Scheduling


def _schedule(sec: SectionSpec, start: float, rng) -> tuple:
    """Stroke times, accents and stroke classes for one section."""
    if sec.label == "Alap" or sec.base_density <= 0:
        return np.zeros(0), np.zeros(0), np.zeros(0, int)
    pat = np.asarray(sec.pattern, dtype=float)
    # per-position accent and stroke colour, fixed for the composition
    acc = 0.55 + 0.3 * rng.random(len(pat))
    acc[0] = 1.0
    colour = np.arange(len(pat)) % 2
    mix_rng = np.random.default_rng(rng.integers(2**63)) if sec.stroke_mix is not None else None
    quiet = list(sec.pauses) + list(sec.recitation_inserts)

    times, amps, kinds = [], [], []
    off = 0.0
    i = 0
    while off < sec.duration_s:
        dens = sec.density_at(off)
        if dens <= 0:
            # jump to the next multiplier change
            later = [w for w, _ in sec.speed_steps if w > off]
            if not later:
                break
            off = min(later)
            continue
        if not any(p <= off < p + length for p, length in quiet):
            times.append(off)
            amps.append(acc[i])
            kinds.append(colour[i] if mix_rng is None else int(mix_rng.random() >= sec.stroke_mix))
        unit = len(pat) / (dens * pat.sum())
        off += pat[i] * unit
        i = (i + 1) % len(pat)
    t = start + np.asarray(times) + rng.uniform(-JITTER, JITTER, len(times))
    return t, np.asarray(amps), np.asarray(kinds, dtype=int)


def _stroke_bank(rng, sr: int, n_variants: int = 6) -> list:
    """Two stroke colours: a resonant low burst and a sharp high burst.

    The low stroke is a short noise excitation rung through a narrow band
    around 90-170 Hz, so it decays smoothly instead of fluttering.
    """
    high_sos = butter(2, [1200, 4500], btype="bandpass", fs=sr, output="sos")
    low, high = [], []
    n_low, n_exc = int(0.25 * sr), int(0.004 * sr)
    n_high = int(0.08 * sr)
    env = np.exp(-np.arange(n_high) / (0.015 * sr))
    for _ in range(n_variants):
        f0 = rng.uniform(90, 170)
        sos = butter(1, [f0 * 0.97, f0 * 1.03], btype="bandpass", fs=sr, output="sos")
        x = np.zeros(n_low)
        x[:n_exc] = rng.standard_normal(n_exc) * np.hanning(n_exc)
        burst = sosfilt(sos, x)
        low.append(burst / np.max(np.abs(burst)))
        burst = sosfilt(high_sos, rng.standard_normal(n_high)) * env
        high.append(burst / np.max(np.abs(burst)))
    return [low, high]


def generate_concert(spec: ConcertSpec) -> GeneratedConcert:
    """Render a concert and its ground truth; deterministic for a seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    edges = np.concatenate([[0.0], np.cumsum([s.duration_s for s in spec.sections])])
    duration = float(edges[-1])

    all_t, all_a, all_k = [], [], []
    for sec, start in zip(spec.sections, edges[:-1]):
        t, a, k = _schedule(sec, float(start), rng)
        all_t.append(t)
        all_a.append(a)
        all_k.append(k)
    t = np.concatenate(all_t)
    a = np.concatenate(all_a)
    k = np.concatenate(all_k)
    keep = (t >= 0) & (t < duration)
    t, a, k = t[keep], a[keep], k[keep]
    order = np.argsort(t, kind="stable")
    t, a, k = t[order], a[order], k[order]

    spans = []
    for sec, s, e in zip(spec.sections, edges[:-1], edges[1:]):
        if spans and spans[-1][2] == sec.label:
            spans[-1] = (spans[-1][0], float(e), sec.label)
        else:
            spans.append((float(s), float(e), sec.label))
    truth = GroundTruth(duration, edges[1:-1].copy(), spans)

    out = GeneratedConcert(spec, truth, t, a)
    if spec.render_mode == "odf":
        n = int(np.ceil(duration * ODF_RATE - 1e-9))
        odf = np.zeros(n)
        np.add.at(odf, np.clip(np.rint(t * ODF_RATE).astype(int), 0, n - 1), a)
        out.odf = OnsetDetectionFunction(odf, ODF_RATE)
    else:
        out.audio = _render_audio(spec, edges, t, a, k, rng)
    return out


def _render_audio(spec, edges, t, a, k, rng) -> AudioBuffer:
    sr = spec.sample_rate
    n = int(round(edges[-1] * sr))
    y = np.zeros(n)
    bank = _stroke_bank(rng, sr)
    pick = rng.integers(0, len(bank[0]), len(t))
    gain = a * rng.uniform(0.85, 1.0, len(t))
    for ti, g, kind, v in zip(np.rint(t * sr).astype(int), gain, k, pick):
        burst = bank[kind][v]
        stop = min(n, ti + len(burst))
        if stop > ti:
            y[ti:stop] += g * burst[: stop - ti]

    noise_sos = butter(4, [300, 3000], btype="bandpass", fs=sr, output="sos")
    for sec, start in zip(spec.sections, edges[:-1]):
        s0 = int(round(start * sr))
        if sec.label == "Alap":
            y[s0 : s0 + int(round(sec.duration_s * sr))] += _melody(sec.duration_s, sr, rng)
        for off, length in sec.pauses:
            p0 = s0 + int(round(off * sr))
            y[p0 : p0 + int(round(length * sr))] = 0.0
        for off, length in sec.recitation_inserts:
            p0 = s0 + int(round(off * sr))
            m = int(round(length * sr))
            noise = sosfilt(noise_sos, rng.standard_normal(m))
            noise *= 0.25 / (np.std(noise) + 1e-12)
            ramp = min(m // 2, int(0.05 * sr))
            fade = np.ones(m)
            if ramp:
                fade[:ramp] = np.linspace(0, 1, ramp)
                fade[-ramp:] = np.linspace(1, 0, ramp)
            seg = y[p0 : p0 + m]
            seg[:] = noise[: len(seg)] * fade[: len(seg)]
    peak = np.max(np.abs(y))
    if peak > 0:
        y *= 0.9 / peak
    return AudioBuffer(y, sr)


def _melody(duration: float, sr: int, rng) -> np.ndarray:
    """Slowly gliding harmonic tone standing in for the melodic intro."""
    n = int(round(duration * sr))
    tt = np.arange(n) / sr
    f0 = 220.0 * 2 ** (0.25 * np.sin(2 * np.pi * tt / max(duration, 1.0) * 2 + rng.uniform(0, 6.28)))
    phase = 2 * np.pi * np.cumsum(f0) / sr
    tone = sum(np.sin(h * phase) / h for h in range(1, 6))
    fade = np.minimum(1.0, np.minimum(tt, duration - tt) / 0.5)
    return 0.3 * tone / 2.3 * fade


# ---------------------------------------------------------------------------
# Statistics-matched batches


def _fit_pattern(rng, density: float, avoid) -> list:
    choices = [p for p in PATTERNS if list(p) != avoid]
    rng.shuffle(choices)
    for p in choices:
        unit = len(p) / (density * sum(p))
        if min(p) * unit - 2 * JITTER >= MIN_IOI:
            return list(p)
    return [1]


def _contrasting(rng, lo, hi, prev, gap, lower=False):
    """Draw a density in [lo, hi] at least ``gap`` away from ``prev``."""
    for _ in range(200):
        d = rng.uniform(lo, hi)
        if prev is None or (abs(d - prev) >= gap and (not lower or d < prev)):
            return float(d)
    if lower:
        return float(max(lo, prev - gap))
    return float(lo if abs(lo - prev) > abs(hi - prev) else hi)


def statistics_batch(n: int, seed: int, duration_range=(900.0, 4800.0),
                     render_mode: str = "audio", density_gap: float = 5.0,
                     pause_prob: float = 0.3, insert_prob: float = 0.15,
                     speed_change_prob: float = 0.1, alap_prob: float = 0.4) -> list:
    """Concert specs whose layout follows the annotated-corpus statistics.

    Spec ``i`` is seeded with ``seed + i``.  Pe/Ka/GTC take about 0.29 /
    0.45 / 0.26 of the post-alap time; Ka compositions average ~210 s,
    GTC ~60 s; stroke densities put the concert mean near 10.6 strokes/s.
    Adjacent compositions differ in density by at least ``density_gap``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    specs = []
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        total = float(rng.uniform(*duration_range))
        sections = []
        alap = 0.0
        if rng.random() < alap_prob:
            alap = float(min(rng.uniform(30, 120), 0.08 * total))
            sections.append(SectionSpec("Alap", alap))
        rest = total - alap
        pe_r = 0.29 + rng.uniform(-0.04, 0.04)
        ka_r = 0.45 + rng.uniform(-0.05, 0.05)
        pe_len = pe_r * rest
        ka_len = ka_r * rest
        gtc_len = rest - pe_len - ka_len

        # Pe: one extempore piece whose density creeps upward
        d0 = rng.uniform(*PE_DENSITY)
        # Pe ends fast enough that the first Ka can sit a full gap below it
        d1 = max(d0 + rng.uniform(3.0, 5.0), KA_DENSITY[0] + density_gap + rng.uniform(0.0, 1.5))
        n_steps = max(2, int(pe_len // PE_STEP))
        steps = [(pe_len * j / n_steps, 1.0 + (d1 / d0 - 1.0) * j / (n_steps - 1))
                 for j in range(1, n_steps)]
        pat = _fit_pattern(rng, d1, None)
        sections.append(SectionSpec("Pe", pe_len, d0, pat, steps))
        prev_d, prev_pat = d1, pat

        for label, span, mean_len, (lo, hi) in (("Ka", ka_len, 210.0, KA_DENSITY),
                                                ("GTC", gtc_len, 60.0, GTC_DENSITY)):
            count = max(2, int(round(span / mean_len)))
            w = rng.uniform(0.7, 1.3, count)
            lengths = span * w / w.sum()
            for j, length in enumerate(lengths):
                first_ka = label == "Ka" and j == 0
                d = _contrasting(rng, lo, hi, prev_d, density_gap, lower=first_ka)
                end_d = d
                steps = []
                if rng.random() < speed_change_prob and d * 2 <= 24:
                    steps = [(float(length * rng.uniform(0.6, 0.8)), 2.0)]
                    end_d = 2 * d
                pat = _fit_pattern(rng, end_d, prev_pat)
                sec = SectionSpec(label, float(length), d, pat, steps)
                if rng.random() < pause_prob:
                    sec.pauses = [(float(length * rng.uniform(0.35, 0.55)), float(rng.uniform(2, 4)))]
                if rng.random() < insert_prob:
                    sec.recitation_inserts = [(float(length * rng.uniform(0.2, 0.3)),
                                               float(rng.uniform(3, 6)))]
                sections.append(sec)
                prev_d, prev_pat = end_d, pat
        specs.append(ConcertSpec(seed + i, sections, render_mode))
    return specs


# ---------------------------------------------------------------------------
# Targeted fixture families


def _alternating_densities(rng, n, lo, hi, gap):
    out, prev = [], None
    for _ in range(n):
        d = _contrasting(rng, lo, hi, prev, gap)
        out.append(d)
        prev = d
    return out


def timbre_constant_batch(n: int, seed: int, n_compositions=(6, 9), length_range=(60.0, 120.0),
                          density_range=(6.0, 18.0), density_gap: float = 5.0,
                          insert_prob: float = 0.6, pause_prob: float = 0.6,
                          stroke_mix: float = 0.5, render_mode: str = "audio") -> list:
    """Concerts whose compositions change rhythm and tempo but not timbre.

    Strokes are low or high at random with a fixed probability, so the
    stroke-colour mix (and the averaged spectrum) is the same everywhere;
    patterns and densities change from one composition to the next.
    Recitation inserts and pauses add short non-structural disruptions.
    """
    specs = []
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        count = int(rng.integers(n_compositions[0], n_compositions[1] + 1))
        dens = _alternating_densities(rng, count, *density_range, density_gap)
        sections = []
        prev = None
        for j, d in enumerate(dens):
            label = "Ka" if j < count // 2 else "GTC"
            length = float(rng.uniform(*length_range))
            pat = _fit_pattern(rng, d, prev)
            sec = SectionSpec(label, length, float(d), pat, stroke_mix=stroke_mix)
            if rng.random() < insert_prob:
                sec.recitation_inserts = [(float(length * rng.uniform(0.2, 0.4)), float(rng.uniform(3, 6)))]
            if rng.random() < pause_prob:
                sec.pauses = [(float(length * rng.uniform(0.6, 0.8)), float(rng.uniform(2, 4)))]
            sections.append(sec)
            prev = pat
        specs.append(ConcertSpec(seed + i, sections, render_mode))
    return specs


def _fixture_context(rng, count=4, length_range=(70.0, 110.0)):
    dens = _alternating_densities(rng, count, 6.0, 18.0, 5.0)
    secs = []
    prev = None
    for d in dens:
        pat = _fit_pattern(rng, d, prev)
        secs.append(SectionSpec("Ka", float(rng.uniform(*length_range)), float(d), pat))
        prev = pat
    return secs


def pause_fixture(seed: int, render_mode: str = "audio"):
    """A short concert whose middle composition contains one 2-4 s pause.

    Returns the spec and the absolute pause time (the split to be merged).
    """
    rng = np.random.default_rng(seed)
    secs = _fixture_context(rng)
    k = len(secs) // 2
    sec = secs[k]
    sec.duration_s = float(rng.uniform(150, 200))
    off = float(sec.duration_s * rng.uniform(0.4, 0.6))
    sec.pauses = [(off, float(rng.uniform(2, 4)))]
    start = sum(s.duration_s for s in secs[:k])
    return ConcertSpec(seed, secs, render_mode), start + off


def speed_change_fixture(seed: int, render_mode: str = "audio"):
    """A short concert whose middle composition doubles its stroke density
    part-way through (same pattern).  Returns the spec and the absolute
    time of the doubling (a split that must survive merging).
    """
    rng = np.random.default_rng(seed)
    secs = _fixture_context(rng)
    k = len(secs) // 2
    sec = secs[k]
    base = float(rng.uniform(5.0, 9.0))
    sec.base_density = base
    sec.pattern = _fit_pattern(rng, 2 * base, None)
    sec.duration_s = float(rng.uniform(150, 200))
    off = float(sec.duration_s * rng.uniform(0.4, 0.6))
    sec.speed_steps = [(off, 2.0)]
    # neighbours contrast with the slow start and the doubled end
    secs[k - 1].base_density = base + float(rng.uniform(5.0, 8.0))
    secs[k + 1].base_density = 2 * base - float(rng.uniform(5.0, 7.0))
    for j in (k - 1, k + 1):
        secs[j].pattern = _fit_pattern(rng, secs[j].base_density, sec.pattern)
    start = sum(s.duration_s for s in secs[:k])
    return ConcertSpec(seed, secs, render_mode), start + off
