"""Compact interpretable 1D-CNN for cross-subject EEG drowsiness detection.

The network, its class activation maps, the band-power baselines and the
leave-one-subject-out harness are implemented directly on numpy.
"""

from .errors import (
    DataError,
    DegenerateBatchError,
    DimensionError,
    FormatError,
    LabelError,
    SomnoError,
    StateError,
)
from .model import ModelConfig, ModelParams, TrainConfig, forward, init_model, predict_bundle, train
from .cam import explain

__version__ = "0.1.0"
