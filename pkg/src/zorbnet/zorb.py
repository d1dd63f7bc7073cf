"""Zeroth-order relaxed backpropagation.

Layers are trained once each, bottom to top.  To train layer ``i`` the
targets ``Y`` are pushed down through every layer above it (pseudoinverse
of dense/conv weights, inverse of activations), and layer ``i`` is then
fitted to that feedback with a single least-squares solve.
"""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linalg
from .activations import DEFAULT_EPSILON, Activation
from .errors import ContractViolation, NumericalError, ZorbError
from .metrics import compute_metrics, infer_task
from .network import Conv, Dense, Flatten, fold_patches, forward, is_trainable, predict


@dataclass
class ZorbConfig:
    rcond: float = linalg.DEFAULT_RCOND
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    record_timings: bool = True

    def __post_init__(self):
        if self.rcond < 0:
            raise ContractViolation(f"rcond must be >= 0, got {self.rcond}")


@dataclass
class TrainReport:
    algorithm: str
    per_layer_seconds: list = field(default_factory=list)
    wall_clock_total: float = 0.0
    final_train_mse: float = float("nan")
    final_train_accuracy: float | None = None
    iterations: int | None = None
    stopped_early: bool = False
    history: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _feedback_through(layer, F, rcond):
    if isinstance(layer, Dense):
        return linalg.pinv(layer.W, rcond) @ (F - layer.b)
    if isinstance(layer, Activation):
        return layer.deactivate(F)
    if isinstance(layer, Conv):
        rows = layer.to_filter_rows(F) - layer.bias
        patch_fb = linalg.pinv(layer.filters, rcond) @ rows
        return fold_patches(patch_fb, layer.input_geometry, layer.kernel, layer.stride)
    if isinstance(layer, Flatten):
        return F
    raise TypeError(f"unknown layer type {type(layer).__name__}")


def compute_feedback(net, target_layer_index, Y, rcond=linalg.DEFAULT_RCOND):
    """Feedback expected at the output of ``net.layers[target_layer_index]``.

    Starts from ``Y`` at the top and walks down to (but excluding) the target
    layer.  Softmax layers above the target need totals from a preceding
    forward pass.
    """
    F = linalg.as_matrix(Y, "Y")
    for j in range(len(net.layers) - 1, target_layer_index, -1):
        F = _feedback_through(net.layers[j], F, rcond)
    return F


def solve_layer(F, X, rcond=linalg.DEFAULT_RCOND):
    """Fit ``W @ X + b ~= F`` in one least-squares solve; returns ``(W, b)``."""
    X = linalg.as_matrix(X, "X")
    F = linalg.as_matrix(F, "F")
    if F.shape[1] != X.shape[1]:
        raise ContractViolation(
            f"feedback has {F.shape[1]} samples but input has {X.shape[1]}"
        )
    Wb = linalg.lstsq_solve(linalg.hstack_ones(X), F, rcond)
    return Wb[:, :-1], Wb[:, -1:]


def _train_layer(net, i, rep, Y, rcond):
    layer = net.layers[i]
    # fresh forward pass from here up, so softmax totals match this round
    forward(net, rep, start=i)
    F = compute_feedback(net, i, Y, rcond)
    if isinstance(layer, Conv):
        W, b = solve_layer(layer.to_filter_rows(F), layer.patches(rep), rcond)
    else:
        W, b = solve_layer(F, rep, rcond)
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
        raise NumericalError("solve produced non-finite parameters")
    layer.set_params(W, b)


def zorb_train(net, X, Y, config=None, task=None, eval_batch_size=None):
    """Train ``net`` in place with a single bottom-to-top ZORB pass.

    ``X`` is ``(d_in, n)``; ``Y`` is ``(d_out, n)`` and already encoded
    (one-hot for multi-class problems).  Conv layers are supported as long
    as ``X`` columns are images laid out as the first conv layer expects.
    """
    config = config or ZorbConfig()
    X = linalg.as_matrix(X, "X")
    Y = linalg.as_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ContractViolation(f"X has {X.shape[1]} samples, Y has {Y.shape[1]}")
    if net.input_dim is not None and X.shape[0] != net.input_dim:
        raise ContractViolation(f"network expects {net.input_dim} inputs, got {X.shape[0]}")
    if net.output_dim is not None and Y.shape[0] != net.output_dim:
        raise ContractViolation(f"network outputs {net.output_dim} rows, Y has {Y.shape[0]}")
    net.reset_state(config.seed)
    for layer in net.layers:
        if isinstance(layer, Activation):
            layer.epsilon = config.epsilon

    report = TrainReport(algorithm="zorb", config=asdict(config))
    start = time.perf_counter()
    rep = X
    for i, layer in enumerate(net.layers):
        if is_trainable(layer):
            t0 = time.perf_counter()
            try:
                _train_layer(net, i, rep, Y, config.rcond)
            except ZorbError as exc:
                raise type(exc)(f"layer {i}: {exc}") from exc
            rep = layer.forward(rep)
            if config.record_timings:
                report.per_layer_seconds.append(time.perf_counter() - t0)
        elif isinstance(layer, Activation):
            rep = layer.activate(rep)
        else:
            rep = layer.forward(rep)
    report.wall_clock_total = time.perf_counter() - start

    pred = predict(net, X, eval_batch_size)
    report.final_train_mse, report.final_train_accuracy = compute_metrics(
        pred, Y, task or infer_task(Y)
    )
    return report


def zorb_train_conv(net, images, Y, config=None, geometry=None, task=None,
                    eval_batch_size=1000):
    """ZORB for networks that start with convolution layers.

    ``images`` is a ``(h * w * c, n)`` batch in ``(h, w, c)`` column order;
    ``geometry`` defaults to ``net.input_geometry``.
    """
    geometry = tuple(geometry or net.input_geometry or ())
    first = next((l for l in net.layers if is_trainable(l)), None)
    if isinstance(first, Conv) and first.input_geometry != geometry:
        raise ContractViolation(
            f"image geometry {geometry} does not match first conv layer "
            f"{first.input_geometry}"
        )
    return zorb_train(net, images, Y, config, task=task, eval_batch_size=eval_batch_size)
