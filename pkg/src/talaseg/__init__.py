"""Boundary detection and section labeling for solo tabla concert recordings."""

from .config import PipelineConfig
from .errors import (AudioReadError, DegenerateInputError, DegenerateMixtureError,
                     TalasegError, TooShortError)
from .evaluation import GroundTruth, evaluate_boundaries, match_boundaries
from .pipeline import FeatureBundle, extract_features, label, segment
from .signal import AudioBuffer, load_audio, write_wav
from .synthesis import ConcertSpec, SectionSpec, generate_concert, statistics_batch

__version__ = "0.1.0"
