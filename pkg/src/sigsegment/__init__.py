"""Signal-based segmentation of anomalous driver activity in video.

The mean of all frames approximates the driver's normal posture; each
frame's summed absolute deviation from it forms a residual signal whose
spikes above ``median + k * std`` become candidate intervals. A CNN-LSTM
labels each interval and predictions are scored by temporal overlap.
"""

from .background import MeanAccumulator, MeanFrame, accumulate, estimate_mean, finalize, merge
from .classifier import CnnLstmClassifier, classify_interval
from .detector import CandidateInterval, SpikeDetector, ThresholdParams, detect, flag_frames, group_segments, threshold_of
from .evaluator import ActivitySegment, average_score, match_eligible, match_predictions, overlap
from .frameio import Frame, FrameSequence, downsample, load_frame, load_sequence, write_frame
from .pipeline import PipelineConfig, SigSegment, run_pipeline
from .signalgen import ResidualSignal, ResidualSignalTransformer, generate_signal, residual_value, smooth

__version__ = "0.1.0"

__all__ = [
    "ActivitySegment",
    "CandidateInterval",
    "CnnLstmClassifier",
    "Frame",
    "FrameSequence",
    "MeanAccumulator",
    "MeanFrame",
    "PipelineConfig",
    "ResidualSignal",
    "ResidualSignalTransformer",
    "SigSegment",
    "SpikeDetector",
    "ThresholdParams",
    "accumulate",
    "average_score",
    "classify_interval",
    "detect",
    "downsample",
    "estimate_mean",
    "finalize",
    "flag_frames",
    "generate_signal",
    "group_segments",
    "load_frame",
    "load_sequence",
    "match_eligible",
    "match_predictions",
    "merge",
    "overlap",
    "residual_value",
    "run_pipeline",
    "smooth",
    "threshold_of",
    "write_frame",
]
