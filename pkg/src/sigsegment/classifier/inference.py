"""Window extraction and interval classification with a trained model."""

import numpy as np

from ..background import MeanFrame
from ..errors import EmptyInterval, ShapeMismatch
from ..evaluator import ActivitySegment
from ..frameio import block_mean
from .model import predict_proba

INPUT_MODES = ("residual", "raw")


def preprocess_frames(frames, mean, out_h, out_w, mode="residual"):
    """Turn uint8 frames ``(k, h, w)`` into model rasters ``(k, out_h, out_w)`` in [0, 1].

    Residual mode uses ``|frame - mean| / 255``; raw mode uses ``frame / 255``.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if mode == "residual":
        mean_values = mean.values if isinstance(mean, MeanFrame) else np.asarray(mean, dtype=np.float64)
        if mean_values.shape != frames.shape[-2:]:
            raise ShapeMismatch(f"mean frame {mean_values.shape} vs frames {frames.shape[-2:]}")
        frames = np.abs(frames - mean_values)
    elif mode != "raw":
        raise ValueError(f"input mode must be one of {INPUT_MODES}, got {mode!r}")
    return block_mean(frames, out_h, out_w) / 255.0


def window_starts(length, n_frames):
    """0-based offsets of the length-``n_frames`` windows covering ``length`` frames.

    Windows advance by ``n_frames // 2``; a final window is aligned to the end
    when the stride does not land on it. A span shorter than one window gets a
    single window at offset 0 (padded by the caller).
    """
    if length < 1:
        raise EmptyInterval("interval has no frames")
    if length <= n_frames:
        return [0]
    stride = max(n_frames // 2, 1)
    starts = list(range(0, length - n_frames + 1, stride))
    if starts[-1] + n_frames < length:
        starts.append(length - n_frames)
    return starts


def interval_windows(seq, mean, start_frame, end_frame, hyper, mode="residual"):
    """Model-ready windows ``(K, T, H, W)`` for 1-based inclusive frames ``[start_frame, end_frame]``."""
    if not 1 <= start_frame <= end_frame <= len(seq):
        raise EmptyInterval(
            f"frames [{start_frame}, {end_frame}] are not within a {len(seq)}-frame sequence"
        )
    raw = np.stack([f.pixels for f in seq[start_frame - 1 : end_frame]])
    rasters = preprocess_frames(raw, mean, hyper.height, hyper.width, mode)
    t_len = hyper.n_frames
    if len(rasters) < t_len:
        pad = np.repeat(rasters[-1:], t_len - len(rasters), axis=0)
        rasters = np.concatenate([rasters, pad])
    return np.stack([rasters[s : s + t_len] for s in window_starts(end_frame - start_frame + 1, t_len)])


def combine_window_probs(probs):
    """Class id maximizing the summed log-probabilities; ties go to the lower id."""
    scores = np.log(np.maximum(np.asarray(probs), 1e-300)).sum(axis=0)
    return int(np.argmax(scores))


def classify_interval(model, seq, mean, interval, mode="residual"):
    """Classify one candidate interval into an :class:`ActivitySegment`."""
    windows = interval_windows(seq, mean, interval.start_frame, interval.end_frame, model.hyper, mode)
    class_id = combine_window_probs(predict_proba(model, windows))
    return ActivitySegment(seq.video_id, class_id, interval.start_s, interval.end_s)
