"""The merge rule: pauses are merged away, tempo doublings are kept.

For a few seeds, builds a concert with one pause inside a composition and
another with a density doubling inside a composition, inserts a split at
the event and shows whether merging removes it.

    python3 demos/merge_rule.py
"""

import numpy as np

from talaseg.features import time_to_frame
from talaseg.pipeline import extract_features
from talaseg.segmentation import Segmentation, merge_segments
from talaseg.synthesis import generate_concert, pause_fixture, speed_change_fixture

for seed in (3001, 3002, 3003):
    for make in (pause_fixture, speed_change_fixture):
        spec, split = make(seed)
        g = generate_concert(spec)
        b = extract_features(g.audio)
        seg = Segmentation.from_times(np.r_[g.truth.boundaries, split], b.duration)
        out = merge_segments(seg, b.asd, b.posteriors)
        kept = np.any(np.abs(out.boundaries - split) < 1e-9)
        j = int(time_to_frame(split))
        before = b.asd.values[max(0, j - 40):j - 10].mean()
        after = b.asd.values[j + 10:j + 40].mean()
        print(f"seed {seed} {make.__name__:21s} split at {split:6.1f} s, "
              f"ASD {before:5.2f} -> {after:5.2f}: {'kept' if kept else 'merged'}")
