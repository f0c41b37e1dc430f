import math

import numpy as np
import pytest
from sklearn.base import clone

from oracles import reference_logits
from sigsegment.background import estimate_mean
from sigsegment.classifier import (
    TINY,
    AdamState,
    CnnLstmClassifier,
    Hyperparams,
    TrainConfig,
    backward,
    classify_interval,
    forward,
    init_model,
    interval_windows,
    load_model,
    loss,
    save_model,
    train,
    train_step,
    window_starts,
)
from sigsegment.classifier.model import LOSS_CLAMP, init_bounds, model_from_bytes, model_to_bytes
from sigsegment.detector import CandidateInterval
from sigsegment.errors import (
    BadHyperparams,
    BadLabel,
    EmptyDataset,
    EmptyInterval,
    MalformedFile,
    ShapeMismatch,
    UnlabeledSample,
)
from sigsegment.frameio import FrameSequence
from sigsegment.pipeline import segment_frames
from sigsegment.synth import random_config, gen_sequence


def _window(rng, hyper=TINY, n=1):
    return rng.uniform(0, 1, size=(n, hyper.n_frames, hyper.height, hyper.width))


def _zero_model(hyper=TINY):
    model = init_model(hyper, 0)
    for arr in model.params.values():
        arr[...] = 0.0
    return model


def test_init_is_deterministic():
    assert init_model(TINY, 3).equals(init_model(TINY, 3))
    assert not init_model(TINY, 3).equals(init_model(TINY, 4))


def test_init_within_glorot_bounds():
    model = init_model(Hyperparams(), 0)
    bounds = init_bounds(model.hyper)
    assert bounds["conv1_w"] == math.sqrt(6 / (9 + 72))
    assert bounds["embed_w"] == math.sqrt(6 / (1024 + 64))
    assert bounds["lstm_wh"] == math.sqrt(6 / 64)
    for name, a in bounds.items():
        w = model.params[name]
        assert np.all(np.abs(w) < a), name
        assert np.abs(w).max() > 0.5 * a, name


def test_init_biases():
    p = init_model(Hyperparams(), 0).params
    for name in ("conv1_b", "conv2_b", "embed_b", "head_b"):
        assert not p[name].any()
    assert np.array_equal(p["lstm_b"][1], np.ones(32))
    assert not p["lstm_b"][[0, 2, 3]].any()


@pytest.mark.parametrize("kwargs", [dict(height=30), dict(n_classes=1), dict(hidden=0), dict(n_frames=2.5)])
def test_bad_hyperparams(kwargs):
    with pytest.raises(BadHyperparams):
        Hyperparams(**kwargs)


def test_default_architecture_shapes():
    hp = Hyperparams()
    assert hp.flat_dim == 16 * 8 * 8 == 1024
    shapes = hp.param_shapes()
    assert shapes["embed_w"] == (64, 1024)
    assert shapes["lstm_wx"] == (4, 32, 64)
    assert shapes["head_w"] == (17, 32)


def test_softmax_output(rng):
    model = init_model(Hyperparams(n_classes=5, n_frames=4), 1)
    probs, _ = forward(model, _window(rng, model.hyper, n=3))
    assert probs.shape == (3, 5)
    assert np.all((probs > 0) & (probs < 1))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-9)


def test_softmax_on_large_inputs(rng):
    model = init_model(TINY, 2)
    for arr in model.params.values():
        arr *= 10.0
    probs, _ = forward(model, 50 * _window(rng))
    assert np.all(np.isfinite(probs))
    assert abs(probs.sum() - 1.0) < 1e-9


def test_zero_model_is_uniform(rng):
    probs, _ = forward(_zero_model(), _window(rng))
    np.testing.assert_array_equal(probs, np.full((1, 3), 1 / 3))


def test_forward_matches_scalar_reference(rng):
    model = init_model(TINY, 7)
    # non-zero biases so every term of the reference is exercised
    for name in ("conv1_b", "conv2_b", "embed_b", "lstm_b", "head_b"):
        model.params[name] += rng.normal(0, 0.1, size=model.params[name].shape)
    window = _window(rng)
    _, cache = forward(model, window)
    ref = reference_logits({k: v.tolist() for k, v in model.params.items()}, window[0].tolist())
    assert np.max(np.abs(cache["logits"][0] - np.array(ref))) < 1e-10


def test_forward_shape_mismatch(rng):
    with pytest.raises(ShapeMismatch):
        forward(init_model(TINY, 0), rng.uniform(size=(1, 4, 8, 8)))


def test_loss_values():
    assert loss(np.array([0.0, 1.0, 0.0]), 1) == 0.0
    assert loss(np.full(4, 0.25), 2) == pytest.approx(math.log(4), abs=1e-15)
    assert loss(np.array([1e-15, 1 - 1e-15]), 0) == -math.log(LOSS_CLAMP)


def test_loss_bad_label():
    with pytest.raises(BadLabel):
        loss(np.full(3, 1 / 3), 3)
    with pytest.raises(BadLabel):
        loss(np.full(3, 1 / 3), -1)


def test_head_bias_gradient_identity(rng):
    model = init_model(TINY, 1)
    probs, cache = forward(model, _window(rng))
    grads = backward(model, cache, [2])
    expected = probs[0].copy()
    expected[2] -= 1.0
    np.testing.assert_array_equal(grads["head_b"], expected)


def test_gradients_finite(rng):
    model = init_model(Hyperparams(n_classes=4, n_frames=5), 2)
    _, cache = forward(model, _window(rng, model.hyper, n=2))
    grads = backward(model, cache, [0, 3])
    assert set(grads) == set(model.params)
    for name, g in grads.items():
        assert g.shape == model.params[name].shape
        assert np.all(np.isfinite(g)), name


def _fd_max_rel_error(model, window, label, h=1e-4):
    _, cache = forward(model, window)
    grads = backward(model, cache, [label])
    worst = 0.0
    for name, arr in model.params.items():
        flat = arr.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + h
            up = loss(forward(model, window)[0][0], label)
            flat[j] = old - h
            down = loss(forward(model, window)[0][0], label)
            flat[j] = old
            fd = (up - down) / (2 * h)
            a = grads[name].reshape(-1)[j]
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-8))
    return worst


def test_gradient_check_tiny(rng):
    model = init_model(TINY, 0)
    assert _fd_max_rel_error(model, _window(rng), 1) < 1e-4


def test_batch_gradient_is_sum_of_singles(rng):
    model = init_model(TINY, 4)
    X = _window(rng, n=3)
    y = [0, 2, 1]
    _, cache = forward(model, X)
    batch = backward(model, cache, y)
    for name in model.params:
        total = sum(backward(model, forward(model, X[i : i + 1])[1], [y[i]])[name] for i in range(3))
        np.testing.assert_allclose(batch[name], total, rtol=1e-10, atol=1e-13)


def test_train_step_zero_lr_keeps_model(rng):
    model = init_model(TINY, 0)
    before = model.copy()
    _, batch_loss, _ = train_step(model, _window(rng, n=2), np.array([0, 1]), TrainConfig(learning_rate=0.0),
                                  AdamState())
    assert model.equals(before)
    assert batch_loss > 0


def test_train_step_needs_labels(rng):
    with pytest.raises(UnlabeledSample):
        train_step(init_model(TINY, 0), _window(rng), None, TrainConfig(), AdamState())


def test_repeated_sample_reduces_loss(rng):
    model = init_model(TINY, 0)
    X, y = _window(rng), np.array([2])
    cfg, state = TrainConfig(), AdamState()
    initial = loss(forward(model, X)[0][0], 2)
    for _ in range(200):
        train_step(model, X, y, cfg, state)
    assert loss(forward(model, X)[0][0], 2) < initial


def test_train_steps_are_deterministic(rng):
    X, y = _window(rng, n=8), rng.integers(0, 3, size=8)

    def run():
        model, state = init_model(TINY, 9), AdamState()
        for _ in range(10):
            train_step(model, X, y, TrainConfig(), state)
        return model_to_bytes(model)

    assert run() == run()


def test_train_zero_epochs(rng):
    model = init_model(TINY, 0)
    before = model.copy()
    _, history = train(model, _window(rng, n=4), np.array([0, 1, 2, 0]), TrainConfig(epochs=0))
    assert history == [] and model.equals(before)


def test_train_errors(rng):
    with pytest.raises(EmptyDataset):
        train(init_model(TINY, 0), np.empty((0, 3, 8, 8)), np.array([]))
    with pytest.raises(ValueError):
        train(init_model(TINY, 0), _window(rng), np.array([5]))


def test_trained_model_generalizes(window_model):
    model, history, ds = window_model
    assert len(history) == 15
    assert history[-1]["loss"] < history[0]["loss"]
    est = CnnLstmClassifier.from_model(model)
    assert est.score(ds.X_test, ds.y_test) >= 0.9


def test_model_file_round_trip(tmp_path):
    model = init_model(Hyperparams(n_classes=5), 1)
    save_model(model, tmp_path / "m.sgsm")
    raw = (tmp_path / "m.sgsm").read_bytes()
    assert raw[:4] == b"SGSM"
    header = np.frombuffer(raw[4:40], dtype="<u4").tolist()
    assert header == [1, 16, 32, 32, 8, 16, 64, 32, 5]
    assert len(raw) == 40 + 8 * model.n_parameters()
    # first LSTM tensor after the embedding is the input-gate input weights
    offset = 40 + 8 * sum(model.params[k].size for k in ("conv1_w", "conv1_b", "conv2_w", "conv2_b",
                                                         "embed_w", "embed_b"))
    first = np.frombuffer(raw, dtype="<f8", count=32 * 64, offset=offset).reshape(32, 64)
    assert np.array_equal(first, model.params["lstm_wx"][0])
    assert load_model(tmp_path / "m.sgsm").equals(model)


def test_model_file_rejects_corruption():
    raw = model_to_bytes(init_model(TINY, 0))
    with pytest.raises(MalformedFile):
        model_from_bytes(raw[:-8])
    with pytest.raises(MalformedFile):
        model_from_bytes(b"NOPE" + raw[4:])


@pytest.mark.parametrize("length,expected", [(1, [0]), (16, [0]), (20, [0, 4]), (24, [0, 8]), (40, [0, 8, 16, 24])])
def test_window_starts(length, expected):
    assert window_starts(length, 16) == expected


def test_window_starts_cover_span():
    for length in range(1, 100):
        starts = window_starts(length, 16)
        covered = set()
        for s in starts:
            covered.update(range(s, min(s + 16, length)))
        assert covered == set(range(length))


def test_short_interval_single_padded_window(rng):
    hp = Hyperparams(n_frames=16, height=8, width=8, n_classes=3)
    frames = rng.integers(0, 256, size=(30, 16, 16), dtype=np.uint8)
    seq = FrameSequence.from_array("v", 10, frames)
    mean = estimate_mean(seq)
    windows = interval_windows(seq, mean, 5, 9, hp)
    assert windows.shape == (1, 16, 8, 8)
    for t in range(5, 16):
        np.testing.assert_array_equal(windows[0, t], windows[0, 4])
    model = init_model(hp, 0)
    segment = classify_interval(model, seq, mean, CandidateInterval(5, 9, 10.0))
    assert (segment.start_s, segment.end_s) == (0.4, 0.9)


def test_interval_outside_sequence(rng):
    seq = FrameSequence.from_array("v", 10, rng.integers(0, 256, size=(5, 8, 8), dtype=np.uint8))
    with pytest.raises(EmptyInterval):
        interval_windows(seq, estimate_mean(seq), 3, 9, TINY)


def test_uniform_model_picks_class_zero(rng):
    hp = Hyperparams(n_frames=4, height=8, width=8, n_classes=5)
    seq = FrameSequence.from_array("v", 10, rng.integers(0, 256, size=(40, 8, 8), dtype=np.uint8))
    segment = classify_interval(_zero_model(hp), seq, estimate_mean(seq), CandidateInterval(3, 30, 10.0))
    assert segment.class_id == 0


def test_classify_intervals_on_synthetic_video(window_model):
    model = window_model[0]
    correct = total = 0
    for seed in range(300, 310):
        seq, truth = gen_sequence(random_config(seed, classes=3))
        mean = estimate_mean(seq)
        for g in truth:
            first, last = segment_frames(g, seq.fps, len(seq))
            pred = classify_interval(model, seq, mean, CandidateInterval(first, last, seq.fps))
            correct += pred.class_id == g.class_id
            total += 1
    assert correct / total >= 0.9


def test_estimator_api(rng):
    est = CnnLstmClassifier(n_frames=3, height=8, width=8, filters1=2, filters2=2, embed=8, hidden=4,
                            n_classes=3, epochs=2, batch_size=2)
    params = est.get_params()
    assert params["hidden"] == 4 and params["epochs"] == 2
    twin = clone(est)
    X, y = _window(rng, TINY, n=6), np.array([0, 1, 2, 0, 1, 2])
    est.fit(X, y)
    twin.fit(X, y)
    assert est.model_.equals(twin.model_)
    assert len(est.history_) == 2
    proba = est.predict_proba(X)
    assert proba.shape == (6, 3)
    assert set(est.predict(X)) <= {0, 1, 2}
    with pytest.raises(ValueError):
        est.predict(rng.uniform(size=(2, 3, 16, 16)))
