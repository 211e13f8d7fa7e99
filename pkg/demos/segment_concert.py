"""Segment and label one synthetic concert, then score it.

Renders a 12 minute statistics-matched concert, runs the full pipeline
with Combo-1 and Combo-2, labels the sections and prints boundaries next
to the ground truth.

    python3 demos/segment_concert.py [seed]
"""

import sys

import numpy as np

from talaseg.config import PipelineConfig
from talaseg.evaluation import evaluate_boundaries, frame_accuracy
from talaseg.pipeline import extract_features, label, segment
from talaseg.synthesis import generate_concert, statistics_batch

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 3
spec = statistics_batch(1, seed, (720.0, 720.0))[0]
concert = generate_concert(spec)
truth = concert.truth
print(f"concert {seed}: {truth.duration:.0f} s, {len(spec.sections)} sections in the spec")
print("truth boundaries:", np.round(truth.boundaries, 1))

bundle = extract_features(concert.audio)
print(f"{len(bundle.onsets.times)} onsets, mean ASD {bundle.asd.values.mean():.2f} strokes/s")

for method in ("combo1", "combo2"):
    seg = segment(bundle, PipelineConfig(method=method))
    rep = evaluate_boundaries(seg.boundaries, truth.boundaries, 5.0)
    print(f"\n{method}: {np.round(seg.boundaries, 1)}")
    print(f"  P {rep.precision:.3f}  R {rep.recall:.3f}  F {rep.f_measure:.3f}")

seg = segment(bundle, PipelineConfig(method="combo2"))
sections = label(bundle, seg)
print("\nsections:")
for start, end, lab in sections.spans():
    print(f"  {start:7.1f} - {end:7.1f}  {lab}")
acc = frame_accuracy(sections.spans(), truth.sections, truth.duration)
print(f"frame accuracy against truth: {acc:.3f}")
