"""Gradient-free neural network training with layer-wise pseudoinverse solves."""

from .activations import Activation, Kind, roundtrip_check
from .baselines import AdamConfig, adam_train, backprop_grads, elm_train
from .errors import (
    ActivationStateError,
    ArchParseError,
    ContractViolation,
    DataFormatError,
    ModelFormatError,
    NumericalError,
    ZorbError,
)
from .linalg import hstack_ones, lstsq_solve, pinv, svd
from .network import Conv, Dense, Flatten, Network, forward, predict
from .serialize import deserialize, serialize
from .zorb import TrainReport, ZorbConfig, compute_feedback, solve_layer, zorb_train, zorb_train_conv

try:
    from importlib.metadata import PackageNotFoundError, version

    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0+unknown"

__all__ = [
    "Activation", "Kind", "roundtrip_check",
    "AdamConfig", "adam_train", "backprop_grads", "elm_train",
    "ActivationStateError", "ArchParseError", "ContractViolation", "DataFormatError",
    "ModelFormatError", "NumericalError", "ZorbError",
    "hstack_ones", "lstsq_solve", "pinv", "svd",
    "Conv", "Dense", "Flatten", "Network", "forward", "predict",
    "deserialize", "serialize",
    "TrainReport", "ZorbConfig", "compute_feedback", "solve_layer", "zorb_train",
    "zorb_train_conv",
]
