"""Where each novelty curve peaks on a three-composition concert.

The three compositions differ in stroke density and pattern, so every
rhythm curve should peak near 90 s and 180 s.  Prints the top peaks of
the six curves and writes them to a CSV for plotting.

    python3 demos/novelty_curves.py [out.csv]
"""

import sys

import numpy as np

from talaseg import artifacts
from talaseg.features import grid_times
from talaseg.novelty import LABELS
from talaseg.pipeline import extract_features
from talaseg.segmentation import pick_peaks
from talaseg.synthesis import ConcertSpec, SectionSpec, generate_concert

spec = ConcertSpec(21, [SectionSpec("Pe", 90, 6.0, [1, 1, 2]),
                        SectionSpec("Ka", 90, 12.0, [1]),
                        SectionSpec("GTC", 90, 17.0, [2, 1, 1])])
bundle = extract_features(generate_concert(spec).audio)
nov = bundle.novelty

print("true boundaries: 90 s, 180 s")
for lab in LABELS:
    peaks = pick_peaks(nov[lab], threshold=0.3)
    top = peaks.times[np.argsort(peaks.scores)[::-1][:3]]
    print(f"{lab:6s} strongest peaks at {np.sort(np.round(top, 1))}")

if len(sys.argv) > 1:
    rows = zip(grid_times(nov.n_frames), *(nov[lab] for lab in LABELS))
    artifacts.write_csv(sys.argv[1], ("time_s",) + LABELS, rows)
    print("wrote", sys.argv[1])
