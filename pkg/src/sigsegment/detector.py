"""Spike thresholding of the residual signal and grouping into candidate intervals."""

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import IoFailure
from .signalgen import ResidualSignal
from .validation import check_signal

STAT_MODES = ("population", "sample")

DEFAULT_K = 2.0
DEFAULT_GAP_TOL_S = 0.5
DEFAULT_MIN_DUR_S = 1.0

# slack for frame counts derived from seconds * fps (e.g. 0.3 * 10)
_EPS = 1e-9


@dataclass(frozen=True)
class ThresholdParams:
    k: float = DEFAULT_K
    stat_mode: str = "population"

    def __post_init__(self):
        if not self.k >= 0:
            raise ValueError(f"k must be non-negative, got {self.k}")
        if self.stat_mode not in STAT_MODES:
            raise ValueError(f"stat_mode must be one of {STAT_MODES}, got {self.stat_mode!r}")


@dataclass(frozen=True)
class FlagSet:
    """1-based indices of frames whose residual is strictly above ``thresh``."""

    indices: tuple
    thresh: float
    values: tuple = ()

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self.indices


@dataclass(frozen=True)
class CandidateInterval:
    """Inclusive 1-based frame span; frame ``i`` covers ``[(i-1)/fps, i/fps)``."""

    start_frame: int
    end_frame: int
    fps: float
    peak_value: float = float("nan")
    video_id: str = ""

    def __post_init__(self):
        if not 1 <= self.start_frame <= self.end_frame:
            raise ValueError(f"invalid frame span [{self.start_frame}, {self.end_frame}]")

    @property
    def start_s(self):
        return (self.start_frame - 1) / self.fps

    @property
    def end_s(self):
        return self.end_frame / self.fps

    @property
    def n_frames(self):
        return self.end_frame - self.start_frame + 1


def threshold_of(signal, params=None):
    """``median(V) + k * std(V)``; std uses divisor n unless ``stat_mode='sample'``."""
    params = params or ThresholdParams()
    values = check_signal(signal, allow_negative=True)
    median = float(np.median(values))
    if params.stat_mode == "sample" and values.size > 1:
        std = float(np.std(values, ddof=1))
    else:
        std = float(np.std(values))
    return median + params.k * std


def flag_frames(signal, thresh):
    values = check_signal(signal, allow_negative=True)
    hits = np.flatnonzero(values > thresh)
    return FlagSet(
        indices=tuple(int(i) + 1 for i in hits),
        thresh=float(thresh),
        values=tuple(float(v) for v in values[hits]),
    )


def group_segments(flags, fps, gap_tol_s=DEFAULT_GAP_TOL_S, min_dur_s=DEFAULT_MIN_DUR_S, video_id=""):
    """Merge flagged frames into intervals.

    Runs separated by at most ``gap_tol_s * fps`` unflagged frames are joined;
    intervals lasting less than ``min_dur_s`` are dropped.
    """
    if gap_tol_s < 0 or min_dur_s < 0:
        raise ValueError("gap_tol_s and min_dur_s must be non-negative")
    indices = list(flags.indices if isinstance(flags, FlagSet) else flags)
    values = list(flags.values) if isinstance(flags, FlagSet) and flags.values else [float("nan")] * len(indices)
    if not indices:
        return []
    max_gap = gap_tol_s * fps + _EPS

    spans = []
    start = prev = indices[0]
    peak = values[0]
    for idx, v in zip(indices[1:], values[1:]):
        if idx - prev - 1 <= max_gap:
            prev = idx
            peak = max(peak, v)
            continue
        spans.append((start, prev, peak))
        start = prev = idx
        peak = v
    spans.append((start, prev, peak))

    out = []
    for s, e, peak in spans:
        if (e - s + 1) / fps + _EPS < min_dur_s:
            continue
        out.append(CandidateInterval(s, e, float(fps), float(peak), video_id))
    return out


def detect(signal, params=None, gap_tol_s=DEFAULT_GAP_TOL_S, min_dur_s=DEFAULT_MIN_DUR_S, fps=None):
    """Threshold, flag and group in one call."""
    if fps is None:
        fps = signal.fps if isinstance(signal, ResidualSignal) else 1.0
    video_id = signal.video_id if isinstance(signal, ResidualSignal) else ""
    thresh = threshold_of(signal, params)
    flags = flag_frames(signal, thresh)
    return group_segments(flags, fps, gap_tol_s, min_dur_s, video_id=video_id)


CANDIDATE_FIELDS = ["video_id", "start_frame", "end_frame", "start_s", "end_s", "peak_value"]


def write_candidates_csv(intervals, path):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CANDIDATE_FIELDS)
            for c in intervals:
                writer.writerow(
                    [c.video_id, c.start_frame, c.end_frame, f"{c.start_s:.6f}", f"{c.end_s:.6f}", repr(c.peak_value)]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write candidates to {path}: {exc}") from exc


def read_candidates_csv(path, fps):
    """Read a candidate CSV back; ``fps`` maps video ids (or a single value) to frame rates."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        rate = fps[r["video_id"]] if isinstance(fps, dict) else fps
        out.append(
            CandidateInterval(
                int(r["start_frame"]), int(r["end_frame"]), float(rate), float(r["peak_value"]), r["video_id"]
            )
        )
    return out


class SpikeDetector(BaseEstimator):
    """Median + k·std spike detector over a residual signal.

    ``fit`` learns the threshold from a signal; ``predict`` returns the
    candidate intervals of a signal under that threshold. Calling
    ``fit_predict`` on one video reproduces the per-video procedure.
    """

    def __init__(self, k=DEFAULT_K, stat_mode="population", gap_tol_s=DEFAULT_GAP_TOL_S,
                 min_dur_s=DEFAULT_MIN_DUR_S, fps=None):
        self.k = k
        self.stat_mode = stat_mode
        self.gap_tol_s = gap_tol_s
        self.min_dur_s = min_dur_s
        self.fps = fps

    def _fps(self, X):
        if self.fps is not None:
            return float(self.fps)
        return X.fps if isinstance(X, ResidualSignal) else 1.0

    def fit(self, X, y=None):
        self.threshold_ = threshold_of(X, ThresholdParams(self.k, self.stat_mode))
        return self

    def flag(self, X):
        check_is_fitted(self, "threshold_")
        return flag_frames(X, self.threshold_)

    def predict(self, X):
        flags = self.flag(X)
        video_id = X.video_id if isinstance(X, ResidualSignal) else ""
        return group_segments(flags, self._fps(X), self.gap_tol_s, self.min_dur_s, video_id=video_id)

    def fit_predict(self, X, y=None):
        return self.fit(X).predict(X)
