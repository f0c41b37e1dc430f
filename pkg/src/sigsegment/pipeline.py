"""End-to-end orchestration: mean posture -> residual signal -> spikes -> classes."""

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .background import estimate_mean
from .classifier.inference import classify_interval, interval_windows
from .classifier.model import Hyperparams, init_model
from .classifier.training import TrainConfig, train
from .detector import ThresholdParams, detect
from .errors import BadConfig, EmptyDataset
from .evaluator import average_score
from .signalgen import generate_signal, smooth


@dataclass
class PipelineConfig:
    """Every tunable of a run; JSON config files use these field names."""

    manifest: str | None = None
    bg: str | None = None
    model: str | None = None
    out: str = "."
    k: float = 2.0
    stat_mode: str = "population"
    gap_tol_s: float = 0.5
    min_dur_s: float = 1.0
    smooth_window: int = 1
    residual_mode: str = "absolute"
    input_mode: str = "residual"
    n_frames: int = 16
    height: int = 32
    width: int = 32
    filters1: int = 8
    filters2: int = 16
    embed: int = 64
    hidden: int = 32
    n_classes: int = 17
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 8
    epochs: int = 30
    shuffle: bool = True
    tol_s: float = 10.0
    seed: int = 0

    @classmethod
    def from_json(cls, path):
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise BadConfig(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2), encoding="utf-8")

    def hyperparams(self):
        return Hyperparams(self.n_frames, self.height, self.width, self.filters1, self.filters2,
                           self.embed, self.hidden, self.n_classes)

    def train_config(self):
        return TrainConfig(self.learning_rate, self.beta1, self.beta2, self.epsilon,
                           self.batch_size, self.epochs, self.seed, self.shuffle)

    def threshold_params(self):
        return ThresholdParams(self.k, self.stat_mode)


def video_signal(seq, mean=None, residual_mode="absolute", smooth_window=1):
    """Mean frame (estimated if absent) and the residual signal of ``seq``."""
    if mean is None:
        mean = estimate_mean(seq)
    signal = generate_signal(seq, mean, residual_mode)
    if smooth_window != 1:
        signal = smooth(signal, smooth_window)
    return mean, signal


def detect_video(seq, mean=None, config=None):
    config = config or PipelineConfig()
    mean, signal = video_signal(seq, mean, config.residual_mode, config.smooth_window)
    candidates = detect(signal, config.threshold_params(), config.gap_tol_s, config.min_dur_s)
    return mean, signal, candidates


def segment_frames(segment, fps, n_frames):
    """1-based inclusive frame span whose start times fall inside ``[start_s, end_s)``."""
    first = math.ceil(segment.start_s * fps - 1e-9) + 1
    last = math.ceil(segment.end_s * fps - 1e-9)
    return max(first, 1), min(last, n_frames)


def training_windows(videos, truth, hyper, mode="residual", means=None):
    """Windows and labels cut from the ground-truth segments of each video."""
    by_video = {}
    for seg in truth:
        by_video.setdefault(seg.video_id, []).append(seg)
    X, y = [], []
    for i, seq in enumerate(videos):
        segs = by_video.get(seq.video_id, [])
        if not segs:
            continue
        mean = means[i] if means is not None else estimate_mean(seq)
        for seg in sorted(segs, key=lambda s: s.start_s):
            first, last = segment_frames(seg, seq.fps, len(seq))
            if first > last:
                continue
            windows = interval_windows(seq, mean, first, last, hyper, mode)
            X.append(windows)
            y.extend([seg.class_id] * len(windows))
    if not X:
        raise EmptyDataset("no ground-truth segment overlaps the supplied videos")
    return np.concatenate(X), np.asarray(y, dtype=np.int64)


def predict_video(seq, model, mean=None, config=None):
    """Detect candidates in one video and classify each into an activity segment."""
    config = config or PipelineConfig()
    mean, _, candidates = detect_video(seq, mean, config)
    return [classify_interval(model, seq, mean, c, config.input_mode) for c in candidates]


def run_pipeline(videos, model, config=None, means=None, truth=None):
    """Predict segments for every video; score them when ``truth`` is given.

    Returns ``(predictions, report_or_None)`` with predictions sorted by
    ``(video_id, start_s)``.
    """
    config = config or PipelineConfig()
    preds = []
    for i, seq in enumerate(videos):
        mean = means[i] if means is not None else None
        preds.extend(predict_video(seq, model, mean, config))
    preds.sort(key=lambda s: (s.video_id, s.start_s, s.end_s, s.class_id))
    report = average_score(truth, preds, config.tol_s) if truth is not None else None
    return preds, report


class SigSegment(BaseEstimator):
    """The full pipeline as one estimator over lists of videos.

    ``fit(videos, segments)`` trains the CNN-LSTM on windows cut from the
    labeled segments; ``predict(videos)`` returns activity segments;
    ``score(videos, segments)`` is the average activity overlap score.
    """

    def __init__(self, k=2.0, stat_mode="population", gap_tol_s=0.5, min_dur_s=1.0,
                 smooth_window=1, residual_mode="absolute", input_mode="residual",
                 n_frames=16, height=32, width=32, n_classes=17, epochs=30, batch_size=8,
                 learning_rate=1e-3, tol_s=10.0, random_state=0):
        self.k = k
        self.stat_mode = stat_mode
        self.gap_tol_s = gap_tol_s
        self.min_dur_s = min_dur_s
        self.smooth_window = smooth_window
        self.residual_mode = residual_mode
        self.input_mode = input_mode
        self.n_frames = n_frames
        self.height = height
        self.width = width
        self.n_classes = n_classes
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.tol_s = tol_s
        self.random_state = random_state

    def _config(self):
        return PipelineConfig(
            k=self.k, stat_mode=self.stat_mode, gap_tol_s=self.gap_tol_s, min_dur_s=self.min_dur_s,
            smooth_window=self.smooth_window, residual_mode=self.residual_mode,
            input_mode=self.input_mode, n_frames=self.n_frames, height=self.height,
            width=self.width, n_classes=self.n_classes, epochs=self.epochs,
            batch_size=self.batch_size, learning_rate=self.learning_rate, tol_s=self.tol_s,
            seed=self.random_state,
        )

    def fit(self, videos, segments):
        cfg = self._config()
        hyper = cfg.hyperparams()
        X, y = training_windows(videos, segments, hyper, cfg.input_mode)
        self.model_ = init_model(hyper, seed=cfg.seed)
        self.model_, self.history_ = train(self.model_, X, y, cfg.train_config())
        return self

    def predict(self, videos):
        check_is_fitted(self, "model_")
        preds, _ = run_pipeline(videos, self.model_, self._config())
        return preds

    def score(self, videos, segments):
        check_is_fitted(self, "model_")
        _, report = run_pipeline(videos, self.model_, self._config(), truth=segments)
        return report.average_score
