"""Training and export side for the mcdlstm accelerator model.

Trains float Monte-Carlo-Dropout LSTM autoencoders/classifiers with PyTorch,
folds the inverted-dropout scaling into the weights, quantizes to the
accelerator's fixed-point formats and emits its weight-file and lookup-table
formats.  Talks to the accelerator model exclusively through those files and
its command line.
"""

from .config import TrainConfig
from .model import McdClassifier, McdRecurrentAutoencoder

__all__ = ["TrainConfig", "McdClassifier", "McdRecurrentAutoencoder"]
