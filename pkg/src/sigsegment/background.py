"""Normal-posture estimation: the per-pixel mean over every frame of a video.

The mean is computed in a single streaming pass with a :class:`MeanAccumulator`.
Sums of 8-bit intensities are exact in float64 for any realistic frame count,
so accumulation order does not affect the result and partial accumulators can
be merged freely.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptySequence, IoFailure, MalformedFile, MissingFile
from .frameio import Frame

MEAN_MAGIC = b"SGBG"
MEAN_VERSION = 1


@dataclass(eq=False)
class MeanFrame:
    """Per-pixel real-valued mean intensity, shape ``(height, width)``."""

    values: np.ndarray
    count: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionMismatch(f"mean frame must be 2-D, got {self.values.shape}")

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape


@dataclass(eq=False)
class MeanAccumulator:
    width: int
    height: int
    sums: np.ndarray = field(default=None)
    count: int = 0

    def __post_init__(self):
        if self.sums is None:
            self.sums = np.zeros((self.height, self.width), dtype=np.float64)
        else:
            self.sums = np.asarray(self.sums, dtype=np.float64)
            if self.sums.shape != (self.height, self.width):
                raise DimensionMismatch("accumulator sums do not match its dimensions")

    @classmethod
    def empty_like(cls, frame):
        h, w = _pixels(frame).shape
        return cls(width=w, height=h)

    @property
    def shape(self):
        return (self.height, self.width)


def _pixels(frame):
    return frame.pixels if isinstance(frame, Frame) else np.asarray(frame)


def accumulate(acc, frame):
    """Return a new accumulator with ``frame`` absorbed."""
    pixels = _pixels(frame)
    if pixels.shape != acc.shape:
        raise DimensionMismatch(
            f"frame is {pixels.shape[1]}x{pixels.shape[0]}, accumulator is {acc.width}x{acc.height}"
        )
    return MeanAccumulator(acc.width, acc.height, acc.sums + pixels, acc.count + 1)


def merge(a, b):
    if a.shape != b.shape:
        raise DimensionMismatch("cannot merge accumulators of different sizes")
    return MeanAccumulator(a.width, a.height, a.sums + b.sums, a.count + b.count)


def finalize(acc):
    if acc.count < 1:
        raise EmptySequence("no frames were accumulated")
    return MeanFrame(acc.sums / acc.count, count=acc.count)


def estimate_mean(seq):
    """Mean frame of ``seq`` (any iterable of frames) in one streaming pass."""
    acc = None
    for frame in seq:
        pixels = _pixels(frame)
        if acc is None:
            acc = MeanAccumulator(width=pixels.shape[1], height=pixels.shape[0])
        # in-place add keeps the single pass allocation-free
        if pixels.shape != acc.shape:
            raise DimensionMismatch(
                f"frame {acc.count} differs in size from frame 0", index=acc.count
            )
        acc.sums += pixels
        acc.count += 1
    if acc is None:
        raise EmptySequence("cannot estimate the mean of an empty sequence")
    return finalize(acc)


def save_mean(mean, path):
    """Write ``mean`` as an SGBG file (magic, version, width, height, float64 values)."""
    payload = struct.pack("<4sIII", MEAN_MAGIC, MEAN_VERSION, mean.width, mean.height)
    payload += np.ascontiguousarray(mean.values, dtype="<f8").tobytes()
    try:
        Path(path).write_bytes(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write mean frame to {path}: {exc}") from exc


def load_mean(path):
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise MissingFile(f"no such mean-frame file: {path}") from None
    if len(data) < 16 or data[:4] != MEAN_MAGIC:
        raise MalformedFile(f"{path}: not an SGBG mean-frame file")
    _, version, width, height = struct.unpack_from("<4sIII", data)
    if version != MEAN_VERSION:
        raise MalformedFile(f"{path}: unsupported SGBG version {version}")
    if len(data) != 16 + 8 * width * height:
        raise MalformedFile(f"{path}: expected {width * height} values")
    values = np.frombuffer(data, dtype="<f8", offset=16).reshape(height, width)
    return MeanFrame(values.astype(np.float64))
