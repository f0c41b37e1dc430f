"""Input validation helpers used by the estimator front-ends."""

import numpy as np

from .errors import DimensionMismatch, EmptySequence, EmptySignal
from .frameio import Frame, FrameSequence


def check_frames(X, fps=None, video_id="video"):
    """Coerce ``X`` into a :class:`FrameSequence`.

    Accepts an existing sequence, a list of frames or a ``(n, h, w)`` array of
    intensities in [0, 255].
    """
    if isinstance(X, FrameSequence):
        seq = X
    elif isinstance(X, np.ndarray) or (isinstance(X, (list, tuple)) and X and not isinstance(X[0], Frame)):
        arr = np.asarray(X)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise DimensionMismatch(f"expected frames shaped (n, h, w), got {arr.shape}")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255) or np.any(arr != np.round(arr)):
                raise ValueError("frame intensities must be integers in [0, 255]")
            arr = arr.astype(np.uint8)
        seq = FrameSequence(video_id, fps or 1.0, arr)
    else:
        seq = FrameSequence(video_id, fps or 1.0, list(X))
    if len(seq) == 0:
        raise EmptySequence(f"video {seq.video_id!r} has no frames")
    return seq


def check_signal(values, allow_negative=False):
    """Return ``values`` as a finite 1-D float64 array with at least one sample."""
    values = np.asarray(getattr(values, "values", values), dtype=np.float64)
    if values.ndim != 1:
        values = values.ravel()
    if values.size == 0:
        raise EmptySignal("signal has no samples")
    if not np.all(np.isfinite(values)):
        raise ValueError("signal contains non-finite values")
    if not allow_negative and np.any(values < 0):
        raise ValueError("signal must be non-negative")
    return values


def check_windows(X, n_frames=None, height=None, width=None):
    """Validate a batch of classifier windows shaped ``(N, T, H, W)`` in [0, 1]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X[None]
    if X.ndim != 4:
        raise DimensionMismatch(f"windows must be (N, T, H, W), got {X.shape}")
    expected = (n_frames, height, width)
    for axis, want in enumerate(expected, start=1):
        if want is not None and X.shape[axis] != want:
            raise DimensionMismatch(f"windows have shape {X.shape[1:]}, model expects {expected}")
    if not np.all(np.isfinite(X)):
        raise ValueError("windows contain non-finite values")
    return X
