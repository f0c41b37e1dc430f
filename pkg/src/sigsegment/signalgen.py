"""Per-frame residual signal: how far each frame deviates from the mean posture."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .background import MeanFrame, estimate_mean
from .errors import BadWindow, DimensionMismatch, EmptySequence, IoFailure
from .frameio import Frame
from .validation import check_frames

RESIDUAL_MODES = ("absolute", "signed")


@dataclass(eq=False)
class ResidualSignal:
    video_id: str
    fps: float
    values: np.ndarray
    pixel_count: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    def __len__(self):
        return self.values.size

    def replace(self, values):
        return ResidualSignal(self.video_id, self.fps, values, self.pixel_count)


def residual_value(frame, mean, mode="absolute"):
    """Sum over pixels of ``|frame - mean|`` (or of the signed difference).

    The per-pixel differences are summed with :func:`math.fsum`, so the
    result is the correctly rounded total and independent of pixel order.
    """
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    values = mean.values if isinstance(mean, MeanFrame) else np.asarray(mean, dtype=np.float64)
    if pixels.shape != values.shape:
        raise DimensionMismatch(
            f"frame shape {pixels.shape} does not match mean shape {values.shape}"
        )
    diff = pixels.astype(np.float64) - values
    if mode == "absolute":
        diff = np.abs(diff)
    elif mode != "signed":
        raise ValueError(f"unknown residual mode {mode!r}, expected one of {RESIDUAL_MODES}")
    return math.fsum(diff.ravel().tolist())


def generate_signal(seq, mean, mode="absolute"):
    """Residual value of every frame in ``seq``, in frame order."""
    if len(seq) == 0:
        raise EmptySequence(f"video {seq.video_id!r} has no frames")
    mean_values = mean.values if isinstance(mean, MeanFrame) else np.asarray(mean, dtype=np.float64)
    out = np.empty(len(seq), dtype=np.float64)
    for i, frame in enumerate(seq):
        if frame.shape != mean_values.shape:
            raise DimensionMismatch(f"frame {i} does not match the mean frame size", index=i)
        out[i] = residual_value(frame, mean_values, mode)
    return ResidualSignal(seq.video_id, seq.fps, out, int(mean_values.size))


def smooth(signal, window=1):
    """Centered moving average; windows are truncated at the signal edges."""
    values = signal.values if isinstance(signal, ResidualSignal) else np.asarray(signal, dtype=np.float64)
    n = values.size
    if not isinstance(window, (int, np.integer)) or window < 1 or window % 2 == 0 or window > max(n, 1):
        raise BadWindow(f"window must be an odd integer in [1, {n}], got {window!r}")
    if window == 1:
        out = values.copy()
    else:
        kernel = np.ones(window)
        sums = np.convolve(values, kernel, mode="same")
        counts = np.convolve(np.ones(n), kernel, mode="same")
        # rounding must not push an average outside the data range
        out = np.clip(sums / counts, values.min(), values.max())
    if isinstance(signal, ResidualSignal):
        return signal.replace(out)
    return out


def write_signal_csv(signal, path):
    """Write ``frame_index,time_s,value`` rows; frame indices are 1-based."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame_index", "time_s", "value"])
            for i, v in enumerate(signal.values, start=1):
                writer.writerow([i, f"{i / signal.fps:.6f}", repr(float(v))])
    except OSError as exc:
        raise IoFailure(f"cannot write signal to {path}: {exc}") from exc


def read_signal_csv(path, video_id=None, fps=None):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    values = np.array([float(r["value"]) for r in rows])
    if fps is None:
        if not rows:
            raise ValueError(f"{path}: cannot infer fps from an empty signal")
        first = rows[0]
        fps = int(first["frame_index"]) / float(first["time_s"])
    return ResidualSignal(video_id or path.stem, fps, values, 0)


class ResidualSignalTransformer(TransformerMixin, BaseEstimator):
    """Learn a video's mean posture and map frames to residual values.

    Parameters
    ----------
    mode : {"absolute", "signed"}, default="absolute"
        Whether per-pixel deviations are summed as magnitudes or with sign.
    smooth_window : int, default=1
        Odd moving-average window applied after the residual; 1 disables it.

    Attributes
    ----------
    mean_frame_ : MeanFrame
        The per-pixel mean over all frames seen by :meth:`fit`.
    """

    def __init__(self, mode="absolute", smooth_window=1):
        self.mode = mode
        self.smooth_window = smooth_window

    def fit(self, X, y=None):
        if self.mode not in RESIDUAL_MODES:
            raise ValueError(f"mode must be one of {RESIDUAL_MODES}, got {self.mode!r}")
        seq = check_frames(X)
        self.mean_frame_ = estimate_mean(seq)
        self.n_frames_seen_ = len(seq)
        return self

    def transform(self, X):
        return self.signal(X).values

    def signal(self, X):
        """Like :meth:`transform` but keeps video id and frame rate."""
        check_is_fitted(self, "mean_frame_")
        seq = check_frames(X)
        signal = generate_signal(seq, self.mean_frame_, self.mode)
        if self.smooth_window != 1:
            signal = smooth(signal, self.smooth_window)
        return signal
