"""Boundary hit-rate and section frame-accuracy scoring."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

TOLERANCE = 5.0
LABEL_GRID = 0.5


@dataclass
class GroundTruth:
    duration: float
    boundaries: np.ndarray
    sections: list = field(default_factory=list)  # (start_s, end_s, label)
    gharana: list = field(default_factory=list)

    def __post_init__(self):
        self.boundaries = np.asarray(self.boundaries, dtype=np.float64).reshape(-1)
        if np.any(np.diff(self.boundaries) <= 0):
            raise ValueError("ground-truth boundaries must be strictly increasing")
        self.sections = [(float(s), float(e), str(lab)) for s, e, lab in self.sections]
        if self.sections:
            edges = [self.sections[0][0]] + [e for _, e, _ in self.sections]
            starts = [s for s, _, _ in self.sections]
            if abs(edges[0]) > 1e-6 or abs(edges[-1] - self.duration) > 1e-6:
                raise ValueError("sections must span [0, duration]")
            if any(abs(a - b) > 1e-6 for a, b in zip(edges[1:-1], starts[1:])):
                raise ValueError("sections must be contiguous")

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        try:
            secs = [(s["start_s"], s["end_s"], s["label"]) for s in d.get("sections", [])]
            return cls(float(d["duration_s"]), d["boundaries_s"], secs, d.get("gharana", []))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed annotation: {exc}") from exc

    def to_dict(self) -> dict:
        out = {
            "duration_s": float(self.duration),
            "boundaries_s": [float(b) for b in self.boundaries],
            "sections": [{"start_s": s, "end_s": e, "label": lab} for s, e, lab in self.sections],
        }
        if self.gharana:
            out["gharana"] = list(self.gharana)
        return out

    @classmethod
    def load(cls, path) -> "GroundTruth":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class Matching:
    pairs: list  # (pred_index, truth_index)
    n_pred: int
    n_truth: int

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return self.n_pred - self.tp

    @property
    def fn(self) -> int:
        return self.n_truth - self.tp


@dataclass
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    tp: int
    fp: int
    fn: int
    tolerance_s: float = TOLERANCE
    matched: list = field(default_factory=list)
    frame_accuracy: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def match_boundaries(pred, truth, tol: float = TOLERANCE) -> Matching:
    """Maximum one-to-one matching with ``|pred - truth| <= tol``.

    Both lists are swept in time order and each truth boundary takes the
    earliest prediction still inside its window.  With equal-width windows
    this greedy choice is cardinality-optimal.
    """
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    po = np.argsort(p, kind="stable")
    to = np.argsort(t, kind="stable")
    eps = 1e-9
    pairs = []
    j = 0
    for ti in to:
        while j < len(po) and p[po[j]] < t[ti] - tol - eps:
            j += 1
        if j < len(po) and p[po[j]] <= t[ti] + tol + eps:
            pairs.append((int(po[j]), int(ti)))
            j += 1
    return Matching(pairs, len(p), len(t))


def prf(matching: Matching) -> tuple:
    """Precision, recall and F-measure; empty denominators give 0."""
    tp = matching.tp
    p = tp / matching.n_pred if matching.n_pred else 0.0
    r = tp / matching.n_truth if matching.n_truth else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def evaluate_boundaries(pred, truth, tol: float = TOLERANCE) -> EvalReport:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    m = match_boundaries(pred, truth, tol)
    p, r, f = prf(m)
    matched = sorted((float(pred[i]), float(truth[j])) for i, j in m.pairs)
    return EvalReport(p, r, f, m.tp, m.fp, m.fn, tol, matched)


def _span_list(spans):
    out = []
    for s in spans:
        if isinstance(s, dict):
            out.append((float(s["start_s"]), float(s["end_s"]), s["label"]))
        else:
            out.append((float(s[0]), float(s[1]), s[2]))
    return out


def labels_on_grid(spans, duration: float, grid: float = LABEL_GRID) -> np.ndarray:
    """Section label at the midpoint of every ``grid``-second frame."""
    spans = _span_list(spans)
    n = int(round(duration / grid))
    mids = (np.arange(n) + 0.5) * grid
    out = np.full(n, "", dtype=object)
    for s, e, lab in spans:
        out[(mids >= s) & (mids < e)] = lab
    if spans:
        out[mids >= spans[-1][1]] = spans[-1][2]
    return out


def frame_accuracy(pred_spans, truth_spans, duration: float, truth_duration: float | None = None,
                   grid: float = LABEL_GRID) -> float:
    """Fraction of ``grid``-second frames whose section labels agree."""
    truth_duration = duration if truth_duration is None else truth_duration
    if abs(duration - truth_duration) > grid:
        raise ValueError("prediction and ground truth durations differ by more than one frame")
    a = labels_on_grid(pred_spans, duration, grid)
    b = labels_on_grid(truth_spans, truth_duration, grid)
    n = min(len(a), len(b))
    if n == 0:
        return 0.0
    return float(np.mean(a[:n] == b[:n]))


def _section_of(times, sections):
    """Index of the section holding each time; an edge belongs to the later
    section."""
    starts = np.array([s for s, _, _ in sections])
    idx = np.searchsorted(starts, np.asarray(times, dtype=float), side="right") - 1
    return np.clip(idx, 0, len(sections) - 1)


def per_section_scores(pred, truth: GroundTruth, tol: float = TOLERANCE) -> dict:
    """Boundary P/R/F split by the ground-truth section label."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    m = match_boundaries(pred, truth.boundaries, tol)
    secs = truth.sections
    if not secs:
        return {}
    labels = [lab for _, _, lab in secs]
    psec = _section_of(pred, secs) if len(pred) else np.zeros(0, int)
    tsec = _section_of(truth.boundaries, secs) if len(truth.boundaries) else np.zeros(0, int)
    matched_pred = {i for i, _ in m.pairs}
    matched_truth = {j for _, j in m.pairs}
    counts = {lab: [0, 0, 0] for lab in dict.fromkeys(labels)}  # tp, fp, fn
    for _, j in m.pairs:
        counts[labels[tsec[j]]][0] += 1
    for i in range(len(pred)):
        if i not in matched_pred:
            counts[labels[psec[i]]][1] += 1
    for j in range(len(truth.boundaries)):
        if j not in matched_truth:
            counts[labels[tsec[j]]][2] += 1
    out = {}
    for lab, (tp, fp, fn) in counts.items():
        mm = Matching([(0, 0)] * tp, tp + fp, tp + fn)
        p, r, f = prf(mm)
        out[lab] = EvalReport(p, r, f, tp, fp, fn, tol)
    return out


def average_reports(reports) -> dict:
    """Arithmetic mean of per-concert scores."""
    reports = list(reports)
    if not reports:
        return {"precision": 0.0, "recall": 0.0, "f_measure": 0.0, "n": 0}
    out = {k: float(np.mean([getattr(r, k) for r in reports]))
           for k in ("precision", "recall", "f_measure")}
    accs = [r.frame_accuracy for r in reports if r.frame_accuracy is not None]
    if accs:
        out["frame_accuracy"] = float(np.mean(accs))
    out["n"] = len(reports)
    return out


def format_table(rows: dict) -> str:
    """Aligned plain-text table of name -> report (or dict of scores)."""
    head = ("name", "P", "R", "F", "TP", "FP", "FN", "acc")
    lines = []
    for name, r in rows.items():
        d = r.to_dict() if hasattr(r, "to_dict") else r
        acc = d.get("frame_accuracy")
        lines.append((
            str(name), f"{d['precision']:.3f}", f"{d['recall']:.3f}", f"{d['f_measure']:.3f}",
            str(d.get("tp", "")), str(d.get("fp", "")), str(d.get("fn", "")),
            "" if acc is None else f"{acc:.3f}",
        ))
    widths = [max(len(h), *(len(l[i]) for l in lines)) if lines else len(h) for i, h in enumerate(head)]
    fmt = "  ".join(f"{{:<{w}}}" if i == 0 else f"{{:>{w}}}" for i, w in enumerate(widths))
    return "\n".join([fmt.format(*head)] + [fmt.format(*l) for l in lines])
