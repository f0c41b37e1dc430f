"""Minibatch Adam training for :class:`CnnLstmModel`."""

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset, IoFailure, UnlabeledSample
from .model import backward, forward, loss


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 8
    epochs: int = 30
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def train_step(model, X, y, config, state):
    """One Adam update on the batch-mean loss. Mutates ``model`` and ``state``.

    Returns ``(model, mean_loss, n_correct)`` where loss and accuracy are
    measured on the forward pass that produced the gradient.
    """
    if y is None or len(X) == 0:
        raise UnlabeledSample("train_step needs a non-empty labeled batch")
    y = np.asarray(y)
    if y.shape != (len(X),) or y.dtype == object:
        raise UnlabeledSample("every sample in the batch needs an integer label")
    probs, cache = forward(model, X)
    losses = loss(probs, y)
    grads = backward(model, cache, y)
    n = len(y)

    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, param in model.params.items():
        g = grads[name] / n
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        param -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
    correct = int(np.sum(probs.argmax(axis=1) == y))
    return model, float(losses.mean()), correct


def train(model, X, y, config=None, state=None, callback=None):
    """Shuffled minibatch training; returns ``(model, history)``.

    ``history`` has one ``{"epoch", "loss", "accuracy"}`` entry per epoch,
    averaged over the minibatch forward passes of that epoch.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if y is None:
        raise UnlabeledSample("training requires labels")
    y = np.asarray(y)
    if len(y) != len(X):
        raise UnlabeledSample(f"{len(X)} windows but {len(y)} labels")
    n_classes = model.hyper.n_classes
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")

    rng = np.random.default_rng(config.seed)
    state = state or AdamState()
    history = []
    n = len(X)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total_loss = 0.0
        total_correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, batch_loss, correct = train_step(model, X[idx], y[idx], config, state)
            total_loss += batch_loss * len(idx)
            total_correct += correct
        record = {"epoch": epoch, "loss": total_loss / n, "accuracy": total_correct / n}
        history.append(record)
        if callback is not None:
            callback(record)
    return model, history


def write_history_csv(history, path):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "accuracy"])
            for r in history:
                writer.writerow([r["epoch"], repr(r["loss"]), repr(r["accuracy"])])
    except OSError as exc:
        raise IoFailure(f"cannot write history to {path}: {exc}") from exc
