"""CNN-LSTM parameters, forward pass, cross-entropy loss and exact backward pass.

Per frame: conv3x3 -> ReLU -> maxpool2 -> conv3x3 -> ReLU -> maxpool2 ->
flatten -> dense -> ReLU. The per-frame embeddings feed an LSTM whose final
hidden state goes through a dense softmax head.
"""

import struct
from dataclasses import astuple, dataclass
from pathlib import Path

import numpy as np

from ..errors import BadHyperparams, BadLabel, IoFailure, MalformedFile, MissingFile, ShapeMismatch
from . import layers

MODEL_MAGIC = b"SGSM"
MODEL_VERSION = 1
GATES = ("i", "f", "g", "o")
LOSS_CLAMP = 1e-12


@dataclass(frozen=True)
class Hyperparams:
    n_frames: int = 16
    height: int = 32
    width: int = 32
    filters1: int = 8
    filters2: int = 16
    embed: int = 64
    hidden: int = 32
    n_classes: int = 17

    def __post_init__(self):
        for name, value in zip(self.__dataclass_fields__, astuple(self)):
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise BadHyperparams(f"{name} must be a positive integer, got {value!r}")
        if self.height % 4 or self.width % 4:
            raise BadHyperparams(f"input size {self.height}x{self.width} must be divisible by 4")
        if self.n_classes < 2:
            raise BadHyperparams("need at least two classes")

    @property
    def flat_dim(self):
        return self.filters2 * (self.height // 4) * (self.width // 4)

    def param_shapes(self):
        """Parameter names and shapes in serialization order."""
        h, e = self.hidden, self.embed
        return {
            "conv1_w": (self.filters1, 1, 3, 3),
            "conv1_b": (self.filters1,),
            "conv2_w": (self.filters2, self.filters1, 3, 3),
            "conv2_b": (self.filters2,),
            "embed_w": (e, self.flat_dim),
            "embed_b": (e,),
            "lstm_wx": (4, h, e),
            "lstm_wh": (4, h, h),
            "lstm_b": (4, h),
            "head_w": (self.n_classes, h),
            "head_b": (self.n_classes,),
        }


TINY = Hyperparams(n_frames=3, height=8, width=8, filters1=2, filters2=2, embed=8, hidden=4, n_classes=3)


class CnnLstmModel:
    def __init__(self, hyper, params):
        self.hyper = hyper
        shapes = hyper.param_shapes()
        if set(params) != set(shapes):
            raise BadHyperparams(f"parameter set {sorted(params)} does not match {sorted(shapes)}")
        self.params = {}
        for name, shape in shapes.items():
            arr = np.array(params[name], dtype=np.float64)
            if arr.shape != shape:
                raise BadHyperparams(f"{name} has shape {arr.shape}, expected {shape}")
            self.params[name] = arr

    def copy(self):
        return CnnLstmModel(self.hyper, {k: v.copy() for k, v in self.params.items()})

    def n_parameters(self):
        return sum(v.size for v in self.params.values())

    def equals(self, other):
        return self.hyper == other.hyper and all(
            np.array_equal(v, other.params[k]) for k, v in self.params.items()
        )


def glorot_bound(fan_in, fan_out):
    return np.sqrt(6.0 / (fan_in + fan_out))


def _fans(name, hyper):
    f1, f2 = hyper.filters1, hyper.filters2
    return {
        "conv1_w": (9, f1 * 9),
        "conv2_w": (f1 * 9, f2 * 9),
        "embed_w": (hyper.flat_dim, hyper.embed),
        "lstm_wx": (hyper.embed, hyper.hidden),
        "lstm_wh": (hyper.hidden, hyper.hidden),
        "head_w": (hyper.hidden, hyper.n_classes),
    }[name]


def init_bounds(hyper):
    """Glorot-uniform half-width for every weight tensor (LSTM bounds are per gate)."""
    return {name: glorot_bound(*_fans(name, hyper)) for name in hyper.param_shapes() if not name.endswith("_b")}


def init_model(hyper=None, seed=0):
    """Glorot-uniform weights, zero biases, LSTM forget-gate bias 1."""
    hyper = hyper or Hyperparams()
    if not isinstance(hyper, Hyperparams):
        raise BadHyperparams(f"expected Hyperparams, got {type(hyper).__name__}")
    rng = np.random.default_rng(seed)
    bounds = init_bounds(hyper)
    shapes = hyper.param_shapes()
    params = {name: np.zeros(shape) for name, shape in shapes.items()}
    for name in ("conv1_w", "conv2_w", "embed_w"):
        params[name] = rng.uniform(-bounds[name], bounds[name], size=shapes[name])
    for k in range(4):
        params["lstm_wx"][k] = rng.uniform(-bounds["lstm_wx"], bounds["lstm_wx"], size=shapes["lstm_wx"][1:])
        params["lstm_wh"][k] = rng.uniform(-bounds["lstm_wh"], bounds["lstm_wh"], size=shapes["lstm_wh"][1:])
    params["lstm_b"][1] = 1.0
    params["head_w"] = rng.uniform(-bounds["head_w"], bounds["head_w"], size=shapes["head_w"])
    return CnnLstmModel(hyper, params)


def _check_input(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X[None]
    hp = model.hyper
    if X.ndim != 4 or X.shape[1:] != (hp.n_frames, hp.height, hp.width):
        raise ShapeMismatch(
            f"windows of shape {X.shape} do not match model input "
            f"(N, {hp.n_frames}, {hp.height}, {hp.width})"
        )
    return X


def forward(model, X):
    """Class probabilities ``(N, C)`` for windows ``X`` shaped ``(N, T, H, W)``.

    Returns ``(probs, cache)``; the cache feeds :func:`backward`.
    """
    X = _check_input(model, X)
    p = model.params
    n, t_len, h, w = X.shape
    x0 = X.reshape(n * t_len, 1, h, w)

    a1, cols1 = layers.conv_forward(x0, p["conv1_w"], p["conv1_b"])
    r1 = np.maximum(a1, 0.0)
    m1, idx1 = layers.maxpool_forward(r1)

    a2, cols2 = layers.conv_forward(m1, p["conv2_w"], p["conv2_b"])
    r2 = np.maximum(a2, 0.0)
    m2, idx2 = layers.maxpool_forward(r2)

    flat = m2.reshape(n * t_len, -1)
    ae = flat @ p["embed_w"].T + p["embed_b"]
    emb = np.maximum(ae, 0.0).reshape(n, t_len, -1)

    h_last, steps = layers.lstm_forward(emb, p["lstm_wx"], p["lstm_wh"], p["lstm_b"])
    logits = h_last @ p["head_w"].T + p["head_b"]
    probs = layers.softmax(logits)

    cache = dict(
        x0_shape=x0.shape, cols1=cols1, a1=a1, idx1=idx1, m1_shape=m1.shape,
        cols2=cols2, a2=a2, idx2=idx2, m2_shape=m2.shape,
        flat=flat, ae=ae, emb=emb, steps=steps, h_last=h_last, logits=logits, probs=probs,
    )
    return probs, cache


def predict_proba(model, X, batch_size=64):
    X = _check_input(model, X)
    return np.concatenate([forward(model, X[i : i + batch_size])[0] for i in range(0, len(X), batch_size)])


def _check_labels(labels, n, n_classes):
    labels = np.atleast_1d(np.asarray(labels))
    if labels.shape != (n,):
        raise BadLabel(f"expected {n} labels, got shape {labels.shape}")
    if not np.all(np.equal(np.mod(labels, 1), 0)) or labels.min() < 0 or labels.max() >= n_classes:
        raise BadLabel(f"labels must be class ids in [0, {n_classes})")
    return labels.astype(np.int64)


def loss(probs, label):
    """Cross-entropy ``-log p[label]`` with the probability clamped at 1e-12.

    Vectorized over rows when ``probs`` is 2-D; returns per-sample losses.
    """
    probs = np.asarray(probs, dtype=np.float64)
    single = probs.ndim == 1
    probs2 = np.atleast_2d(probs)
    labels = _check_labels(label, probs2.shape[0], probs2.shape[1])
    picked = probs2[np.arange(len(labels)), labels]
    out = -np.log(np.maximum(picked, LOSS_CLAMP))
    return float(out[0]) if single else out


def backward(model, cache, labels):
    """Gradient of the summed cross-entropy over the batch w.r.t. every parameter."""
    p = model.params
    probs = cache["probs"]
    n, n_classes = probs.shape
    labels = _check_labels(labels, n, n_classes)
    t_len = cache["emb"].shape[1]

    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    grads = {
        "head_w": dlogits.T @ cache["h_last"],
        "head_b": dlogits.sum(axis=0),
    }
    dh = dlogits @ p["head_w"]
    demb, grads["lstm_wx"], grads["lstm_wh"], grads["lstm_b"] = layers.lstm_backward(
        dh, cache["emb"], p["lstm_wx"], p["lstm_wh"], cache["steps"]
    )

    dae = demb.reshape(n * t_len, -1) * (cache["ae"] > 0)
    grads["embed_w"] = dae.T @ cache["flat"]
    grads["embed_b"] = dae.sum(axis=0)
    dm2 = (dae @ p["embed_w"]).reshape(cache["m2_shape"])

    dr2 = layers.maxpool_backward(dm2, cache["idx2"], cache["a2"].shape)
    da2 = dr2 * (cache["a2"] > 0)
    dm1, grads["conv2_w"], grads["conv2_b"] = layers.conv_backward(
        da2, cache["cols2"], cache["m1_shape"], p["conv2_w"]
    )
    dr1 = layers.maxpool_backward(dm1, cache["idx1"], cache["a1"].shape)
    da1 = dr1 * (cache["a1"] > 0)
    _, grads["conv1_w"], grads["conv1_b"] = layers.conv_backward(
        da1, cache["cols1"], cache["x0_shape"], p["conv1_w"], need_dx=False
    )
    return {name: grads[name] for name in p}


def _serial_order(hyper):
    """``(name, index)`` pairs: LSTM tensors are interleaved per gate (Wx, Wh, b)."""
    order = [("conv1_w", None), ("conv1_b", None), ("conv2_w", None), ("conv2_b", None),
             ("embed_w", None), ("embed_b", None)]
    for k in range(len(GATES)):
        order += [("lstm_wx", k), ("lstm_wh", k), ("lstm_b", k)]
    return order + [("head_w", None), ("head_b", None)]


def model_to_bytes(model):
    hp = model.hyper
    out = [struct.pack("<4sI", MODEL_MAGIC, MODEL_VERSION), struct.pack("<8I", *astuple(hp))]
    for name, k in _serial_order(hp):
        arr = model.params[name] if k is None else model.params[name][k]
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


def model_from_bytes(data, source="<bytes>"):
    if len(data) < 40 or data[:4] != MODEL_MAGIC:
        raise MalformedFile(f"{source}: not an SGSM model file")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != MODEL_VERSION:
        raise MalformedFile(f"{source}: unsupported SGSM version {version}")
    try:
        hp = Hyperparams(*struct.unpack_from("<8I", data, 8))
    except BadHyperparams as exc:
        raise MalformedFile(f"{source}: {exc}") from None
    shapes = hp.param_shapes()
    params = {name: np.zeros(shape) for name, shape in shapes.items()}
    offset = 40
    for name, k in _serial_order(hp):
        shape = shapes[name] if k is None else shapes[name][1:]
        size = int(np.prod(shape))
        if offset + 8 * size > len(data):
            raise MalformedFile(f"{source}: truncated at tensor {name}")
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=offset).reshape(shape)
        if k is None:
            params[name] = arr.astype(np.float64)
        else:
            params[name][k] = arr
        offset += 8 * size
    if offset != len(data):
        raise MalformedFile(f"{source}: {len(data) - offset} trailing bytes")
    return CnnLstmModel(hp, params)


def save_model(model, path):
    try:
        Path(path).write_bytes(model_to_bytes(model))
    except OSError as exc:
        raise IoFailure(f"cannot write model to {path}: {exc}") from exc


def load_model(path):
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise MissingFile(f"no such model file: {path}") from None
    return model_from_bytes(data, str(path))
