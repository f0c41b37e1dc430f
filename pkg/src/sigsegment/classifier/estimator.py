"""scikit-learn front-end for the CNN-LSTM."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..validation import check_windows
from .model import Hyperparams, init_model, predict_proba
from .training import TrainConfig, train


class CnnLstmClassifier(ClassifierMixin, BaseEstimator):
    """Window classifier: per-frame CNN features, LSTM over time, softmax head.

    ``X`` is an array of windows shaped ``(n_samples, n_frames, height, width)``
    with values in [0, 1]; ``y`` holds integer class ids in ``[0, n_classes)``.

    Attributes
    ----------
    model_ : CnnLstmModel
        Trained parameters.
    history_ : list of dict
        Per-epoch ``loss`` and ``accuracy``.
    classes_ : ndarray
        ``arange(n_classes)``.
    """

    def __init__(self, n_frames=16, height=32, width=32, filters1=8, filters2=16, embed=64,
                 hidden=32, n_classes=17, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 epsilon=1e-8, batch_size=8, epochs=30, shuffle=True, random_state=0):
        self.n_frames = n_frames
        self.height = height
        self.width = width
        self.filters1 = filters1
        self.filters2 = filters2
        self.embed = embed
        self.hidden = hidden
        self.n_classes = n_classes
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.batch_size = batch_size
        self.epochs = epochs
        self.shuffle = shuffle
        self.random_state = random_state

    def hyperparams(self):
        return Hyperparams(self.n_frames, self.height, self.width, self.filters1, self.filters2,
                           self.embed, self.hidden, self.n_classes)

    def train_config(self):
        return TrainConfig(self.learning_rate, self.beta1, self.beta2, self.epsilon,
                           self.batch_size, self.epochs, self.random_state, self.shuffle)

    def fit(self, X, y):
        hp = self.hyperparams()
        X = check_windows(X, hp.n_frames, hp.height, hp.width)
        self.model_ = init_model(hp, seed=self.random_state)
        self.model_, self.history_ = train(self.model_, X, np.asarray(y), self.train_config())
        self.classes_ = np.arange(hp.n_classes)
        return self

    @classmethod
    def from_model(cls, model, **kwargs):
        """Wrap an already trained :class:`CnnLstmModel`."""
        hp = model.hyper
        est = cls(hp.n_frames, hp.height, hp.width, hp.filters1, hp.filters2, hp.embed,
                  hp.hidden, hp.n_classes, **kwargs)
        est.model_ = model
        est.history_ = []
        est.classes_ = np.arange(hp.n_classes)
        return est

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        hp = self.model_.hyper
        X = check_windows(X, hp.n_frames, hp.height, hp.width)
        return predict_proba(self.model_, X)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
