import json

import numpy as np
import pytest
from sklearn.base import clone

from sigsegment.classifier import Hyperparams, init_model
from sigsegment.errors import BadConfig, EmptyDataset
from sigsegment.evaluator import ActivitySegment
from sigsegment.frameio import FrameSequence
from sigsegment.pipeline import (
    PipelineConfig,
    SigSegment,
    detect_video,
    run_pipeline,
    segment_frames,
    training_windows,
)
from sigsegment.synth import Anomaly, SynthConfig, gen_sequence, random_config

SMALL = dict(n_frames=8, height=16, width=16, n_classes=3)


def _video(seed, **kw):
    return gen_sequence(random_config(seed, duration_s=30, **kw))


def test_config_json_round_trip(tmp_path):
    cfg = PipelineConfig(k=3.5, epochs=2, hidden=8)
    cfg.to_json(tmp_path / "c.json")
    assert PipelineConfig.from_json(tmp_path / "c.json") == cfg


def test_config_rejects_unknown_fields(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"k": 2, "kk": 3}))
    with pytest.raises(BadConfig):
        PipelineConfig.from_json(tmp_path / "c.json")


def test_config_builders():
    cfg = PipelineConfig(hidden=8, n_classes=4, epochs=3, k=1.5)
    assert cfg.hyperparams() == Hyperparams(hidden=8, n_classes=4)
    assert cfg.train_config().epochs == 3
    assert cfg.threshold_params().k == 1.5


@pytest.mark.parametrize(
    "start,end,expected",
    [(0.0, 1.0, (1, 10)), (1.0, 2.5, (11, 25)), (0.05, 0.15, (2, 2)), (5.0, 99.0, (51, 60))],
)
def test_segment_frames(start, end, expected):
    assert segment_frames(ActivitySegment("v", 0, start, end), 10.0, 60) == expected


def test_detect_constant_video_finds_nothing():
    seq = FrameSequence.from_array("c", 10, np.full((50, 8, 8), 77, dtype=np.uint8))
    _, signal, candidates = detect_video(seq)
    assert not signal.values.any() and candidates == []


def test_detect_single_anomaly():
    seq, truth = _video(1)
    _, _, candidates = detect_video(seq)
    assert len(candidates) == 1
    c, g = candidates[0], truth[0]
    assert abs(c.start_s - g.start_s) <= 0.2 and abs(c.end_s - g.end_s) <= 0.2


def test_training_windows_labels():
    seq, truth = _video(2, n_anomalies=2)
    hp = Hyperparams(**SMALL)
    X, y = training_windows([seq], truth, hp)
    assert X.shape[1:] == (8, 16, 16)
    assert set(y) == {g.class_id for g in truth}


def test_training_windows_need_truth():
    seq, _ = _video(2)
    with pytest.raises(EmptyDataset):
        training_windows([seq], [ActivitySegment("other", 0, 1.0, 2.0)], Hyperparams(**SMALL))


def test_run_pipeline_outputs_sorted_and_scored():
    videos, truth = zip(*(_video(s) for s in (5, 3, 4)))
    truth = [g for t in truth for g in t]
    preds, report = run_pipeline(list(videos), init_model(Hyperparams(**SMALL), 0), truth=truth)
    keys = [(p.video_id, p.start_s) for p in preds]
    assert keys == sorted(keys) and len(preds) == 3
    assert 0.0 <= report.average_score <= 1.0
    assert len(report.records) == 3


def test_run_pipeline_without_candidates_scores_zero():
    seq = gen_sequence(SynthConfig(duration_s=10, width=16, height=16, noise_std=0, video_id="q"))[0]
    truth = [ActivitySegment("q", 0, 2.0, 4.0)]
    preds, report = run_pipeline([seq], init_model(Hyperparams(**SMALL), 0), truth=truth)
    assert preds == [] and report.average_score == 0.0


def test_estimator_fit_predict_score():
    train = [_video(s, classes=3) for s in range(10, 16)]
    test = [_video(s, classes=3) for s in range(40, 43)]
    est = SigSegment(epochs=10, random_state=1, **SMALL)
    assert clone(est).get_params() == est.get_params()
    est.fit([v for v, _ in train], [g for _, t in train for g in t])
    assert len(est.history_) == 10
    preds = est.predict([v for v, _ in test])
    assert all(isinstance(p, ActivitySegment) for p in preds)
    score = est.score([v for v, _ in test], [g for _, t in test for g in t])
    assert 0.0 <= score <= 1.0


def test_estimator_predict_needs_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        SigSegment().predict([])


def test_two_anomalies_two_candidates():
    cfg = SynthConfig(duration_s=40, width=32, height=32,
                      anomalies=(Anomaly(0, 5.0, 10.0, 50.0), Anomaly(1, 25.0, 31.0, 50.0)))
    seq, _ = gen_sequence(cfg)
    _, _, candidates = detect_video(seq)
    assert len(candidates) == 2
