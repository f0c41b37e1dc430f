import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20230612)


@pytest.fixture(scope="session")
def window_model():
    """A CNN-LSTM trained on 3-class synthetic windows, shared across tests."""
    from sigsegment.classifier import Hyperparams, TrainConfig, init_model, train
    from sigsegment.synth import SynthConfig, gen_window_dataset

    ds = gen_window_dataset(SynthConfig(seed=11), classes=3, per_class=12)
    model = init_model(Hyperparams(n_classes=3), seed=5)
    model, history = train(model, ds.X_train, ds.y_train, TrainConfig(epochs=15, seed=5))
    return model, history, ds
