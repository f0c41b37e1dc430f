"""Command-line entry point: ``sigsegment <subcommand> ...``.

Every subcommand writes its results into ``--out`` and reports diagnostics on
stderr. Module errors exit with status 1 and a stage-tagged message.
"""

import argparse
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from .background import estimate_mean, load_mean, save_mean
from .classifier.inference import classify_interval
from .classifier.model import init_model, load_model, save_model
from .classifier.training import train, write_history_csv
from .detector import read_candidates_csv, write_candidates_csv
from .errors import EmptyDataset, MissingFile, SigSegmentError
from .evaluator import average_score, read_segments_csv, write_report_json, write_segments_csv
from .frameio import load_sequence
from .pipeline import PipelineConfig, detect_video, run_pipeline, training_windows, video_signal
from .signalgen import write_signal_csv
from .synth import random_config, write_suite

log = logging.getLogger("sigsegment")


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")


def _stage(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (SigSegmentError, OSError, ValueError, KeyError) as exc:
        raise StageError(stage, exc) from exc


def _config(args):
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    overrides = {}
    for f in fields(PipelineConfig):
        if f.name == "manifest":
            continue
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    return replace(cfg, **overrides)


def _out_dir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifests(args, cfg):
    paths = list(args.manifest or [])
    if not paths and cfg.manifest:
        paths = [cfg.manifest]
    data_dir = getattr(args, "data_dir", None)
    if data_dir:
        paths += sorted(str(p) for p in Path(data_dir).glob("*.json"))
    if not paths:
        raise StageError("load", MissingFile("no manifest given (use --manifest or --data-dir)"))
    return paths


def _load_mean(cfg, seq):
    if cfg.bg:
        return _stage("estimate-bg", load_mean, cfg.bg)
    return _stage("estimate-bg", estimate_mean, seq)


def cmd_estimate_bg(args):
    cfg = _config(args)
    out = _out_dir(cfg)
    for manifest in _manifests(args, cfg):
        seq = _stage("load", load_sequence, manifest)
        mean = _stage("estimate-bg", estimate_mean, seq)
        path = out / f"{seq.video_id}.sgbg"
        _stage("estimate-bg", save_mean, mean, path)
        log.info("wrote %s (%d frames)", path, mean.count)


def cmd_signal(args):
    cfg = _config(args)
    out = _out_dir(cfg)
    for manifest in _manifests(args, cfg):
        seq = _stage("load", load_sequence, manifest)
        mean = _load_mean(cfg, seq)
        _, signal = _stage("signal", video_signal, seq, mean, cfg.residual_mode, cfg.smooth_window)
        path = out / f"{seq.video_id}_signal.csv"
        _stage("signal", write_signal_csv, signal, path)
        log.info("wrote %s", path)


def cmd_detect(args):
    cfg = _config(args)
    out = _out_dir(cfg)
    candidates = []
    for manifest in _manifests(args, cfg):
        seq = _stage("load", load_sequence, manifest)
        mean = _load_mean(cfg, seq)
        _, signal, found = _stage("detect", detect_video, seq, mean, cfg)
        if args.emit_signal:
            _stage("signal", write_signal_csv, signal, out / f"{seq.video_id}_signal.csv")
        log.info("%s: %d candidate interval(s)", seq.video_id, len(found))
        candidates.extend(found)
    _stage("detect", write_candidates_csv, candidates, out / "candidates.csv")


def _load_dataset(directory, gt_name):
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFile(f"dataset directory {directory} does not exist")
    manifests = sorted(directory.glob("*.json"))
    if not manifests:
        raise EmptyDataset(f"no manifests in {directory}")
    videos = [load_sequence(m) for m in manifests]
    truth = read_segments_csv(directory / gt_name)
    return videos, truth


def cmd_train(args):
    cfg = _config(args)
    out = _out_dir(cfg)
    videos, truth = _stage("load", _load_dataset, args.dataset, args.gt_name)
    hyper = _stage("train", cfg.hyperparams)
    X, y = _stage("train", training_windows, videos, truth, hyper, cfg.input_mode)
    log.info("training on %d windows from %d videos", len(X), len(videos))
    model = _stage("train", init_model, hyper, cfg.seed)

    def report(r):
        log.info("epoch %d  loss %.5f  accuracy %.4f", r["epoch"], r["loss"], r["accuracy"])

    model, history = _stage("train", train, model, X, y, cfg.train_config(), callback=report)
    _stage("train", save_model, model, out / "model.sgsm")
    _stage("train", write_history_csv, history, out / "history.csv")


def cmd_classify(args):
    cfg = _config(args)
    out = _out_dir(cfg)
    if not cfg.model:
        raise StageError("classify", MissingFile("--model is required"))
    model = _stage("classify", load_model, cfg.model)
    videos = {}
    for manifest in _manifests(args, cfg):
        seq = _stage("load", load_sequence, manifest)
        videos[seq.video_id] = seq
    fps = {vid: seq.fps for vid, seq in videos.items()}
    candidates = _stage("classify", read_candidates_csv, args.candidates, fps)
    means = {}
    preds = []
    for c in candidates:
        seq = videos.get(c.video_id)
        if seq is None:
            raise StageError("classify", MissingFile(f"no manifest given for video {c.video_id!r}"))
        if c.video_id not in means:
            means[c.video_id] = _load_mean(cfg, seq)
        preds.append(_stage("classify", classify_interval, model, seq, means[c.video_id], c, cfg.input_mode))
    _stage("classify", write_segments_csv, preds, out / "predictions.csv")


def cmd_evaluate(args):
    cfg = _config(args)
    out = _out_dir(cfg)
    gts = _stage("evaluate", read_segments_csv, args.gt)
    preds = _stage("evaluate", read_segments_csv, args.pred)
    report = _stage("evaluate", average_score, gts, preds, cfg.tol_s)
    _stage("evaluate", write_report_json, report, out / "report.json")
    log.info("average activity overlap score %.4f", report.average_score)


def cmd_pipeline(args):
    cfg = _config(args)
    out = _out_dir(cfg)
    if not cfg.model:
        raise StageError("pipeline", MissingFile("--model is required"))
    model = _stage("classify", load_model, cfg.model)
    videos = [_stage("load", load_sequence, m) for m in _manifests(args, cfg)]
    means = None
    if cfg.bg:
        if len(videos) != 1:
            raise StageError("estimate-bg", ValueError("--bg applies to a single manifest only"))
        means = [_stage("estimate-bg", load_mean, cfg.bg)]
    preds, _ = _stage("pipeline", run_pipeline, videos, model, cfg, means)
    _stage("pipeline", write_segments_csv, preds, out / "submission.csv")
    log.info("%d activity segment(s) written", len(preds))
    if args.gt:
        gts = _stage("evaluate", read_segments_csv, args.gt)
        ids = {v.video_id for v in videos}
        gts = [g for g in gts if g.video_id in ids]
        report = _stage("evaluate", average_score, gts, preds, cfg.tol_s)
        _stage("evaluate", write_report_json, report, out / "report.json")
        log.info("average activity overlap score %.4f", report.average_score)


def cmd_synth(args):
    cfg = _config(args)
    out = _out_dir(cfg)
    overrides = {}
    for name in ("width", "height", "fps", "duration_s", "noise_std", "base_pattern"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    configs = [
        _stage("synth", random_config, cfg.seed + i, classes=args.classes,
               n_anomalies=args.anomalies, **overrides)
        for i in range(args.videos)
    ]
    manifests, truth = _stage("synth", write_suite, out, configs)
    log.info("wrote %d video(s) with %d ground-truth segment(s) to %s", len(manifests), len(truth), out)


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, help="seed for every random draw of the run")
    shared.add_argument("--config", help="JSON file with PipelineConfig fields")
    shared.add_argument("--out", help="output directory")
    shared.add_argument("-v", "--verbose", action="store_true")

    video = argparse.ArgumentParser(add_help=False)
    video.add_argument("--manifest", action="append", help="frame manifest (repeatable)")
    video.add_argument("--data-dir", help="directory whose *.json manifests are all processed")
    video.add_argument("--bg", help="precomputed mean-frame (.sgbg) file")

    signal = argparse.ArgumentParser(add_help=False)
    signal.add_argument("--residual-mode", dest="residual_mode", choices=["absolute", "signed"])
    signal.add_argument("--smooth", dest="smooth_window", type=int, help="odd moving-average window")

    detect = argparse.ArgumentParser(add_help=False)
    detect.add_argument("--k", type=float, help="threshold = median + k * std")
    detect.add_argument("--stat-mode", dest="stat_mode", choices=["population", "sample"])
    detect.add_argument("--gap-tol", dest="gap_tol_s", type=float, help="merge gaps up to this many seconds")
    detect.add_argument("--min-dur", dest="min_dur_s", type=float, help="drop intervals shorter than this")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", help="trained model (.sgsm) file")
    model.add_argument("--input-mode", dest="input_mode", choices=["residual", "raw"])

    parser = argparse.ArgumentParser(prog="sigsegment", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-bg", parents=[shared, video], help="mean frame of each video")
    p.set_defaults(func=cmd_estimate_bg)

    p = sub.add_parser("signal", parents=[shared, video, signal], help="residual signal CSV")
    p.set_defaults(func=cmd_signal)

    p = sub.add_parser("detect", parents=[shared, video, signal, detect], help="candidate intervals CSV")
    p.add_argument("--emit-signal", action="store_true", help="also write each residual signal")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("train", parents=[shared, model], help="train the CNN-LSTM on a labeled dataset dir")
    p.add_argument("--dataset", required=True, help="directory with manifests and a ground-truth CSV")
    p.add_argument("--gt-name", default="gt.csv")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--n-classes", dest="n_classes", type=int)
    p.add_argument("--frames", dest="n_frames", type=int, help="window length T")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", parents=[shared, video, model], help="classify candidate intervals")
    p.add_argument("--candidates", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", parents=[shared], help="average activity overlap score")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--tol", dest="tol_s", type=float, help="start/end matching tolerance in seconds")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", parents=[shared, video, signal, detect, model],
                       help="detect, classify and optionally score")
    p.add_argument("--gt", help="ground-truth CSV; enables report.json")
    p.add_argument("--tol", dest="tol_s", type=float)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("synth", parents=[shared], help="render a synthetic labeled video suite")
    p.add_argument("--videos", type=int, default=10)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--anomalies", type=int, default=1, help="anomalies per video")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--fps", type=float)
    p.add_argument("--duration", dest="duration_s", type=float)
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--base-pattern", dest="base_pattern", choices=["constant", "gradient", "blob"])
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SigSegmentError, OSError, ValueError) as exc:
        print(f"error: [config] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
