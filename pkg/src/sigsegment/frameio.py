"""Grayscale frame containers, binary PGM (P5) I/O and JSON frame manifests."""

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadTargetSize,
    DimensionMismatch,
    EmptySequence,
    IoFailure,
    MalformedManifest,
    MalformedPgm,
    MissingFile,
)

_WHITESPACE = b" \t\n\r\v\f"


@dataclass(frozen=True, eq=False)
class Frame:
    """One 8-bit grayscale raster, stored row-major as a ``(height, width)`` array."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DimensionMismatch(f"frame must be a non-empty 2-D raster, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            if np.any(pixels < 0) or np.any(pixels > 255) or np.any(pixels != np.round(pixels)):
                raise ValueError("frame intensities must be integers in [0, 255]")
            pixels = pixels.astype(np.uint8)
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_list(cls, width, height, values):
        values = np.asarray(values)
        if values.size != width * height:
            raise DimensionMismatch(
                f"{values.size} pixel values do not fill a {width}x{height} frame"
            )
        return cls(values.reshape(height, width))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def shape(self):
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"Frame(width={self.width}, height={self.height})"


class FrameSequence:
    """An ordered, re-iterable source of equally sized frames.

    ``frames`` may be a list of :class:`Frame`, a ``(n, h, w)`` uint8 array or
    a list of PGM paths. Paths are decoded lazily on access so long videos
    never have to be resident in memory.
    """

    def __init__(self, video_id, fps, frames, shape=None):
        fps = float(fps)
        if not np.isfinite(fps) or fps <= 0:
            raise ValueError(f"fps must be positive, got {fps}")
        self.video_id = str(video_id)
        self.fps = fps
        if isinstance(frames, np.ndarray):
            if frames.ndim != 3:
                raise DimensionMismatch(f"frame stack must be (n, h, w), got {frames.shape}")
            frames = np.ascontiguousarray(frames, dtype=np.uint8)
            self._shape = tuple(frames.shape[1:])
        else:
            frames = list(frames)
            if shape is not None:
                self._shape = tuple(shape)
            elif frames and isinstance(frames[0], Frame):
                self._shape = frames[0].shape
                for i, f in enumerate(frames):
                    if f.shape != self._shape:
                        raise DimensionMismatch(
                            f"frame {i} is {f.width}x{f.height}, frame 0 is "
                            f"{self._shape[1]}x{self._shape[0]}",
                            index=i,
                        )
            else:
                self._shape = None
        self._frames = frames

    @classmethod
    def from_array(cls, video_id, fps, array):
        return cls(video_id, fps, np.asarray(array))

    @property
    def shape(self):
        """Frame shape as ``(height, width)``."""
        return self._shape

    def __len__(self):
        return len(self._frames)

    def _get(self, i):
        item = self._frames[i]
        if isinstance(item, Frame):
            return item
        if isinstance(item, np.ndarray):
            return Frame(item)
        frame = load_frame(item)
        if self._shape is not None and frame.shape != self._shape:
            raise DimensionMismatch(f"frame {i} differs in size from frame 0", index=i)
        return frame

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._get(j) for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self._get(i)

    def __iter__(self):
        for i in range(len(self)):
            yield self._get(i)

    def to_array(self):
        """Materialize the whole sequence as an ``(n, h, w)`` uint8 array."""
        if isinstance(self._frames, np.ndarray):
            return self._frames
        if len(self) == 0:
            raise EmptySequence(f"video {self.video_id!r} has no frames")
        return np.stack([f.pixels for f in self])

    def __repr__(self):
        return f"FrameSequence(video_id={self.video_id!r}, fps={self.fps}, n={len(self)})"


def _next_token(data, pos):
    # Skips whitespace and '#' comments as allowed in netpbm headers.
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedPgm("truncated PGM header")
    return data[start:pos], pos


def _parse_header(data, path):
    if data[:2] != b"P5":
        raise MalformedPgm(f"{path}: bad magic {data[:2]!r}, expected b'P5'")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise MalformedPgm(f"{path}: non-integer header field {token!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedPgm(f"{path}: invalid size {width}x{height}")
    if maxval != 255:
        raise MalformedPgm(f"{path}: maxval {maxval} unsupported, only 255")
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise MalformedPgm(f"{path}: missing whitespace after maxval")
    return width, height, pos + 1


def read_pgm_header(path):
    """Return ``(width, height)`` of a PGM file without decoding the raster."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(512)
    except FileNotFoundError:
        raise MissingFile(f"no such frame file: {path}") from None
    width, height, _ = _parse_header(head, path)
    return width, height


def load_frame(path):
    """Read a binary PGM (P5, maxval 255) file into a :class:`Frame`."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise MissingFile(f"no such frame file: {path}") from None
    except IsADirectoryError:
        raise MissingFile(f"{path} is a directory") from None
    width, height, offset = _parse_header(data, path)
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise MalformedPgm(
            f"{path}: truncated raster, {len(raster)} of {width * height} bytes"
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()
    return Frame(pixels)


def write_frame(frame, path):
    """Write ``frame`` as a binary PGM P5 with maxval 255."""
    if not isinstance(frame, Frame):
        frame = Frame(frame)
    header = b"P5\n%d %d\n255\n" % (frame.width, frame.height)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(frame.pixels).tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write frame to {path}: {exc}") from exc


def load_sequence(manifest_path):
    """Open the frame sequence described by a JSON manifest.

    The manifest is ``{"video_id": str, "fps": number, "frames": [path, ...]}``
    with frame paths relative to the manifest. Headers of all frames are read
    eagerly to validate sizes; rasters are decoded on demand.
    """
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MissingFile(f"no such manifest: {manifest_path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedManifest(f"{manifest_path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise MalformedManifest(f"{manifest_path}: manifest must be a JSON object")
    video_id = doc.get("video_id")
    fps = doc.get("fps")
    frames = doc.get("frames")
    if not isinstance(video_id, str):
        raise MalformedManifest(f"{manifest_path}: 'video_id' must be a string")
    if isinstance(fps, bool) or not isinstance(fps, (int, float)) or not fps > 0:
        raise MalformedManifest(f"{manifest_path}: 'fps' must be a positive number, got {fps!r}")
    if not isinstance(frames, list) or not all(isinstance(f, str) for f in frames):
        raise MalformedManifest(f"{manifest_path}: 'frames' must be a list of paths")

    root = manifest_path.parent
    paths = [root / f for f in frames]
    shape = None
    for i, p in enumerate(paths):
        w, h = read_pgm_header(p)
        if shape is None:
            shape = (h, w)
        elif (h, w) != shape:
            raise DimensionMismatch(
                f"{manifest_path}: frame {i} is {w}x{h}, frame 0 is {shape[1]}x{shape[0]}",
                index=i,
            )
    return FrameSequence(video_id, fps, paths, shape=shape)


def write_sequence(seq, directory, pattern="frame_{:06d}.pgm"):
    """Write every frame of ``seq`` plus a ``<video_id>.json`` manifest into ``directory``.

    Returns the manifest path.
    """
    directory = Path(directory)
    frame_dir = directory / seq.video_id
    try:
        frame_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {frame_dir}: {exc}") from exc
    names = []
    for i, frame in enumerate(seq):
        name = pattern.format(i)
        write_frame(frame, frame_dir / name)
        names.append(os.path.join(seq.video_id, name))
    manifest = directory / f"{seq.video_id}.json"
    doc = {"video_id": seq.video_id, "fps": seq.fps, "frames": names}
    try:
        manifest.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {manifest}: {exc}") from exc
    return manifest


def cell_edges(size, cells):
    """Integer boundaries splitting ``size`` samples into ``cells`` contiguous cells."""
    return (np.arange(cells + 1) * size) // cells


def block_mean(raster, out_h, out_w):
    """Average ``raster`` over an ``out_h`` x ``out_w`` rectangular partition.

    Cell ``(r, c)`` spans rows ``[floor(r*H/out_h), floor((r+1)*H/out_h))`` and
    the analogous columns. Leading axes are treated as a batch.
    """
    raster = np.asarray(raster, dtype=np.float64)
    h, w = raster.shape[-2:]
    if not (1 <= out_h <= h and 1 <= out_w <= w):
        raise BadTargetSize(f"cannot pool {w}x{h} down to {out_w}x{out_h}")
    rows = cell_edges(h, out_h)
    cols = cell_edges(w, out_w)
    sums = np.add.reduceat(raster, rows[:-1], axis=-2)
    sums = np.add.reduceat(sums, cols[:-1], axis=-1)
    counts = np.outer(np.diff(rows), np.diff(cols))
    return sums / counts


def downsample(frame, out_w, out_h):
    """Block-average ``frame`` to ``out_h`` x ``out_w`` and rescale to [0, 1]."""
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    return block_mean(pixels, out_h, out_w) / 255.0
