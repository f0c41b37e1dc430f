from .estimator import CnnLstmClassifier
from .inference import classify_interval, interval_windows, preprocess_frames, window_starts
from .model import (
    TINY,
    CnnLstmModel,
    Hyperparams,
    backward,
    forward,
    init_model,
    load_model,
    loss,
    predict_proba,
    save_model,
)
from .training import AdamState, TrainConfig, train, train_step, write_history_csv

__all__ = [
    "TINY",
    "AdamState",
    "CnnLstmClassifier",
    "CnnLstmModel",
    "Hyperparams",
    "TrainConfig",
    "backward",
    "classify_interval",
    "forward",
    "init_model",
    "interval_windows",
    "load_model",
    "loss",
    "predict_proba",
    "preprocess_frames",
    "save_model",
    "train",
    "train_step",
    "window_starts",
    "write_history_csv",
]
