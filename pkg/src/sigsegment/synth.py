"""Synthetic driver videos with injected, labeled anomaly segments.

Frames are a static base pattern plus Gaussian pixel noise, quantized to
8 bits. During each anomaly a bright block is composited at a position
determined by the class id, so both the detector (via the residual spike)
and the classifier (via the block position) have a known ground truth.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadConfig
from .evaluator import ActivitySegment, write_segments_csv
from .frameio import FrameSequence, write_sequence

BASE_PATTERNS = ("constant", "gradient", "blob")
MOTIFS = ("block", "bar")
GRID = 5


@dataclass(frozen=True)
class Anomaly:
    class_id: int
    start_s: float
    end_s: float
    amplitude: float = 50.0
    motif: str = "block"


@dataclass(frozen=True)
class SynthConfig:
    width: int = 64
    height: int = 64
    fps: float = 10.0
    duration_s: float = 60.0
    noise_std: float = 10.0
    base_pattern: str = "gradient"
    anomalies: tuple = ()
    seed: int = 0
    video_id: str = "synth"
    jitter: int = 1

    @property
    def n_frames(self):
        return int(round(self.duration_s * self.fps))

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise BadConfig("frame size must be positive")
        if not self.fps > 0 or not self.duration_s > 0:
            raise BadConfig("fps and duration_s must be positive")
        if self.n_frames < 1:
            raise BadConfig("configuration yields no frames")
        if self.noise_std < 0:
            raise BadConfig("noise_std must be non-negative")
        if self.base_pattern not in BASE_PATTERNS:
            raise BadConfig(f"base_pattern must be one of {BASE_PATTERNS}")
        if self.jitter < 0:
            raise BadConfig("jitter must be non-negative")
        spans = sorted((a.start_s, a.end_s) for a in self.anomalies)
        for a in self.anomalies:
            if a.class_id < 0:
                raise BadConfig("class ids must be non-negative")
            if not 0 <= a.start_s < a.end_s <= self.duration_s:
                raise BadConfig(f"anomaly [{a.start_s}, {a.end_s}] outside [0, {self.duration_s}]")
            if a.amplitude < 0:
                raise BadConfig("amplitude must be non-negative")
            if a.motif not in MOTIFS:
                raise BadConfig(f"motif must be one of {MOTIFS}")
        for (s0, e0), (s1, e1) in zip(spans, spans[1:]):
            if s1 < e0:
                raise BadConfig(f"anomalies [{s0}, {e0}] and [{s1}, {e1}] overlap")
        return self


def base_frame(pattern, height, width):
    """Noise-free background in intensity units (float)."""
    if pattern == "constant":
        return np.full((height, width), 100.0)
    if pattern == "gradient":
        return np.tile(np.linspace(60.0, 160.0, width), (height, 1))
    if pattern == "blob":
        yy, xx = np.mgrid[0:height, 0:width]
        cy, cx = (height - 1) / 2, (width - 1) / 2
        sigma = max(height, width) / 4
        return 80.0 + 80.0 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    raise BadConfig(f"unknown base pattern {pattern!r}")


def motif_mask(class_id, height, width, motif="block", offset=(0, 0)):
    """Boolean mask of the class-specific shape, shifted by ``offset`` pixels."""
    mask = np.zeros((height, width), dtype=bool)
    if motif == "block":
        cell = class_id % (GRID * GRID)
        bh, bw = max(height // GRID, 1), max(width // GRID, 1)
        top = (cell // GRID) * bh + offset[0]
        left = (cell % GRID) * bw + offset[1]
        mask[max(top, 0) : max(top + bh, 0), max(left, 0) : max(left + bw, 0)] = True
    elif motif == "bar":
        bw = max(width // 8, 1)
        left = (class_id % 8) * bw + offset[1]
        mask[:, max(left, 0) : max(left + bw, 0)] = True
    else:
        raise BadConfig(f"unknown motif {motif!r}")
    return mask


def _render(base, noise, overlay):
    return np.clip(np.rint(base + overlay + noise), 0, 255).astype(np.uint8)


def gen_sequence(config):
    """Render ``config`` into ``(FrameSequence, [ActivitySegment, ...])``."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    h, w, n = config.height, config.width, config.n_frames
    base = base_frame(config.base_pattern, h, w)
    noise = rng.normal(0.0, config.noise_std, size=(n, h, w)) if config.noise_std > 0 else np.zeros((n, h, w))
    overlay = np.zeros((n, h, w))
    times = np.arange(n) / config.fps
    truth = []
    for a in sorted(config.anomalies, key=lambda a: a.start_s):
        offset = tuple(rng.integers(-config.jitter, config.jitter + 1, size=2)) if config.jitter else (0, 0)
        active = (times >= a.start_s) & (times < a.end_s)
        overlay[active] += a.amplitude * motif_mask(a.class_id, h, w, a.motif, offset)
        truth.append(ActivitySegment(config.video_id, a.class_id, a.start_s, a.end_s))
    frames = _render(base, noise, overlay)
    return FrameSequence(config.video_id, config.fps, frames), truth


def random_config(seed, video_id=None, classes=3, n_anomalies=1, min_len_s=3.0, max_len_s=8.0,
                  amplitude_ratio=5.0, **overrides):
    """A config with ``n_anomalies`` non-overlapping anomalies placed at random.

    Anomaly amplitudes are ``amplitude_ratio`` times the noise std and all
    boundaries sit on the frame grid.
    """
    cfg = SynthConfig(seed=seed, video_id=video_id or f"synth_{seed:04d}", **overrides)
    rng = np.random.default_rng([seed, 7919])
    amplitude = amplitude_ratio * cfg.noise_std if cfg.noise_std > 0 else 50.0
    slot = cfg.duration_s / n_anomalies
    if max_len_s + 2.0 > slot:
        raise BadConfig(f"{n_anomalies} anomalies of up to {max_len_s} s do not fit in {cfg.duration_s} s")
    anomalies = []
    for k in range(n_anomalies):
        length = rng.uniform(min_len_s, max_len_s)
        start = k * slot + 1.0 + rng.uniform(0.0, slot - length - 2.0)
        start = round(start * cfg.fps) / cfg.fps
        end = round((start + length) * cfg.fps) / cfg.fps
        anomalies.append(Anomaly(int(rng.integers(classes)), start, end, amplitude))
    return SynthConfig(**{**cfg.__dict__, "anomalies": tuple(anomalies)}).validate()


@dataclass
class WindowDataset:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    X: np.ndarray = field(repr=False, default=None)
    y: np.ndarray = field(repr=False, default=None)


def gen_window_dataset(config, classes, per_class, amplitude=None, n_frames=16, out_size=(32, 32),
                       mode="residual", test_fraction=0.2):
    """Labeled classifier windows rendered like anomalous video frames.

    Each window holds ``n_frames`` frames of the config's background and
    noise with the class motif composited, preprocessed by the same routine
    the interval classifier uses. The noise-free base pattern stands in for
    the video's mean frame.
    """
    from .classifier.inference import preprocess_frames

    if classes < 2 or per_class < 2:
        raise BadConfig("need at least 2 classes and 2 windows per class")
    config.validate()
    if amplitude is None:
        amplitude = 5.0 * config.noise_std if config.noise_std > 0 else 50.0
    rng = np.random.default_rng([config.seed, 104729])
    h, w = config.height, config.width
    base = base_frame(config.base_pattern, h, w)
    out_h, out_w = out_size

    labels = np.repeat(np.arange(classes), per_class)
    windows = np.empty((len(labels), n_frames, out_h, out_w))
    for k, c in enumerate(labels):
        offset = tuple(rng.integers(-config.jitter, config.jitter + 1, size=2)) if config.jitter else (0, 0)
        overlay = amplitude * motif_mask(int(c), h, w, "block", offset)
        noise = rng.normal(0.0, config.noise_std, size=(n_frames, h, w)) if config.noise_std > 0 else 0.0
        frames = _render(base, noise, overlay)
        windows[k] = preprocess_frames(frames, base, out_h, out_w, mode)

    order = rng.permutation(len(labels))
    n_train = int(round((1.0 - test_fraction) * len(labels)))
    tr, te = order[:n_train], order[n_train:]
    return WindowDataset(windows[tr], labels[tr], windows[te], labels[te], windows, labels)


def write_suite(directory, configs, gt_name="gt.csv"):
    """Render every config to PGM frames and manifests under ``directory``.

    Also writes the union of injected segments as a ground-truth CSV.
    Returns ``(manifest_paths, ground_truth)``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifests, truth = [], []
    for cfg in configs:
        seq, segs = gen_sequence(cfg)
        manifests.append(write_sequence(seq, directory))
        truth.extend(segs)
    write_segments_csv(truth, directory / gt_name)
    return manifests, truth
