"""Reference trainers to compare ZORB against.

* ``adam_train``: mini-batch backpropagation with Adam on mean squared error.
* ``elm_train``: extreme-learning-machine style training, where hidden layers
  keep their random initialization and only the output layer is solved.
"""

import time
from dataclasses import asdict, dataclass

import numpy as np

from . import linalg
from .activations import Activation, Kind
from .errors import ContractViolation, NumericalError
from .metrics import compute_metrics, infer_task
from .network import Dense, forward, predict
from .zorb import TrainReport, _train_layer


@dataclass
class AdamConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    batch_size: int = 32
    max_iterations: int = 2500
    target_mse: float | None = None
    eval_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ContractViolation("learning_rate must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ContractViolation("beta1 and beta2 must lie in [0, 1)")
        if self.batch_size < 1 or self.eval_every < 1 or self.max_iterations < 0:
            raise ContractViolation("batch_size, eval_every must be >= 1")


def mse_loss(net, X, Y):
    return float(np.mean((forward(net, X) - Y) ** 2))


def _check_differentiable(net):
    for i, layer in enumerate(net.layers):
        if isinstance(layer, Activation):
            if layer.correction is not None:
                raise ContractViolation(
                    f"layer {i}: activation carries a ZORB correction; reset the network first"
                )
        elif not isinstance(layer, Dense):
            raise ContractViolation(
                f"layer {i}: backprop supports dense and activation layers only, "
                f"got {type(layer).__name__}"
            )


def _activation_grad(kind, out, g):
    if kind is Kind.LINEAR:
        return g
    if kind is Kind.SIGMOID:
        return g * out * (1.0 - out)
    if kind is Kind.TANH:
        return g * (1.0 - out**2)
    if kind is Kind.RELU:
        return g * (out > 0)
    # softmax Jacobian applied column by column
    return out * (g - np.sum(g * out, axis=0, keepdims=True))


def backprop_grads(net, X, Y):
    """Gradients of the mean squared error w.r.t. every dense layer.

    The loss is ``mean((net(X) - Y) ** 2)`` over all ``n * d_out`` entries.
    Returns a list of ``(dW, db)`` pairs, one per ``Dense`` layer in order.
    """
    _check_differentiable(net)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    cache = []
    h = X
    for layer in net.layers:
        out = layer.activate(h) if isinstance(layer, Activation) else layer.forward(h)
        cache.append((h, out))
        h = out
    g = 2.0 * (h - Y) / h.size
    grads = []
    for layer, (inp, out) in zip(reversed(net.layers), reversed(cache)):
        if isinstance(layer, Activation):
            g = _activation_grad(layer.kind, out, g)
        else:
            grads.append((g @ inp.T, g.sum(axis=1, keepdims=True)))
            g = layer.W.T @ g
    return grads[::-1]


class Adam:
    """Adam state for a list of parameter arrays updated in place."""

    def __init__(self, params, cfg):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps_hat)


def _batches(n, batch_size, rng):
    while True:
        order = rng.permutation(n)
        for i in range(0, n, batch_size):
            yield order[i : i + batch_size]


def adam_train(net, X, Y, cfg=None, task=None):
    """Mini-batch Adam on MSE.

    Stops after ``cfg.max_iterations`` mini-batch steps, or earlier at the
    first checkpoint (every ``cfg.eval_every`` steps, full training set)
    whose MSE is at or below ``cfg.target_mse``.
    """
    cfg = cfg or AdamConfig()
    X = linalg.as_matrix(X, "X")
    Y = linalg.as_matrix(Y, "Y")
    net.reset_state(cfg.seed)
    _check_differentiable(net)
    dense = [l for l in net.layers if isinstance(l, Dense)]
    params = [p for l in dense for p in (l.W, l.b)]
    opt = Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)
    batches = _batches(X.shape[1], cfg.batch_size, rng)
    report = TrainReport(algorithm="adam", config=asdict(cfg))

    start = time.perf_counter()
    it = 0
    while it < cfg.max_iterations:
        idx = next(batches)
        grads = backprop_grads(net, X[:, idx], Y[:, idx])
        opt.step([g for pair in grads for g in pair])
        it += 1
        if it % cfg.eval_every == 0 or it == cfg.max_iterations:
            loss = mse_loss(net, X, Y)
            if not np.isfinite(loss):
                raise NumericalError(f"Adam diverged at iteration {it} (loss {loss})")
            report.history.append((it, time.perf_counter() - start, loss))
            if cfg.target_mse is not None and loss <= cfg.target_mse:
                report.stopped_early = True
                break
    report.wall_clock_total = time.perf_counter() - start
    report.iterations = it

    report.final_train_mse, report.final_train_accuracy = compute_metrics(
        predict(net, X), Y, task or infer_task(Y)
    )
    return report


def elm_train(net, X, Y, rcond=linalg.DEFAULT_RCOND, seed=0, task=None):
    """Solve only the last dense layer; everything below keeps its
    random initialization."""
    X = linalg.as_matrix(X, "X")
    Y = linalg.as_matrix(Y, "Y")
    dense_idx = [i for i, l in enumerate(net.layers) if isinstance(l, Dense)]
    if not dense_idx or any(
        not isinstance(l, (Dense, Activation)) for l in net.layers
    ):
        raise ContractViolation("elm_train needs a dense/activation stack")
    out = dense_idx[-1]
    net.reset_state(seed)
    report = TrainReport(algorithm="elm", config={"rcond": rcond, "seed": seed})
    start = time.perf_counter()
    H = forward(net, X, stop=out)
    _train_layer(net, out, H, Y, rcond)
    report.wall_clock_total = time.perf_counter() - start
    report.per_layer_seconds = [report.wall_clock_total]
    report.final_train_mse, report.final_train_accuracy = compute_metrics(
        predict(net, X), Y, task or infer_task(Y)
    )
    return report
