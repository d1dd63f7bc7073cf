"""Adaptive activation functions.

Each activation can be run forward (``activate``) and backward
(``deactivate``).  Deactivating Sigmoid/Tanh first records the feedback's
``low``/``high`` and squeezes it affinely into the activation's open range,
so the analytic inverse exists; the next forward pass undoes that affine map,
landing outputs back in ``[low, high]``.  Softmax remembers the per-sample
normalizers from its last forward pass and uses them once when
deactivating.  ReLU fills negative feedback with random values from
``(-1, 0)``.
"""

import copy
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit, logsumexp

from .errors import ActivationStateError

DEFAULT_EPSILON = 1e-6


class Kind(str, Enum):
    LINEAR = "linear"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    RELU = "relu"
    SOFTMAX = "softmax"


# Canonical open range of each bounded activation.
_RANGES = {Kind.SIGMOID: (0.0, 1.0), Kind.TANH: (-1.0, 1.0)}


@dataclass
class Correction:
    low: float
    high: float


@dataclass
class Activation:
    """Activation layer plus the state ZORB stores on it.

    ``correction`` is set by deactivating Sigmoid/Tanh.  ``log_totals`` holds
    ``log(sum(exp(x)))`` per column after a Softmax forward pass; it is kept
    in log space so large logits do not overflow.
    """

    kind: Kind
    epsilon: float = DEFAULT_EPSILON
    rng_seed: int = 0
    correction: Correction | None = None
    log_totals: np.ndarray | None = None
    _rng: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.kind = Kind(self.kind)
        if not self.epsilon > 0 or not self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")

    @property
    def softmax_totals(self):
        return None if self.log_totals is None else np.exp(self.log_totals)

    def reseed(self, seed):
        self.rng_seed = int(seed)
        self._rng = None

    @property
    def rng(self):
        if self._rng is None:
            self._rng = np.random.default_rng(self.rng_seed)
        return self._rng

    def reset(self):
        """Drop every stored correction and restart the random stream."""
        self.correction = None
        self.log_totals = None
        self._rng = None

    # -- forward ---------------------------------------------------------

    def activate(self, X):
        X = np.asarray(X, dtype=np.float64)
        kind = self.kind
        if kind is Kind.LINEAR:
            return X
        if kind is Kind.RELU:
            return np.maximum(X, 0.0)
        if kind is Kind.SOFTMAX:
            self.log_totals = logsumexp(X, axis=0)
            return np.exp(X - self.log_totals)
        out = expit(X) if kind is Kind.SIGMOID else np.tanh(X)
        if self.correction is None:
            return out
        lo, hi = _RANGES[kind]
        eps = self.epsilon
        # exact inverse of the squeeze applied in deactivate()
        unit = (out - (lo + eps)) / (hi - lo - 2 * eps)
        c = self.correction
        return c.low + unit * (c.high - c.low)

    # -- backward --------------------------------------------------------

    def deactivate(self, F):
        F = np.asarray(F, dtype=np.float64)
        kind = self.kind
        if kind is Kind.LINEAR:
            return F
        if kind is Kind.RELU:
            neg = F < 0
            out = F.copy()
            out[neg] = self._draw_negative(int(neg.sum()))
            return out
        if kind is Kind.SOFTMAX:
            if self.log_totals is None:
                raise ActivationStateError(
                    "softmax deactivate needs the totals of a prior forward pass"
                )
            if self.log_totals.shape[0] != F.shape[1]:
                raise ActivationStateError(
                    f"stored totals cover {self.log_totals.shape[0]} samples, "
                    f"feedback has {F.shape[1]}"
                )
            log_eps = np.log(self.epsilon)
            with np.errstate(divide="ignore"):
                out = np.log(np.maximum(F, 0.0)) + self.log_totals
            out = np.maximum(out, log_eps)
            self.log_totals = None
            return out

        low, high = float(F.min()), float(F.max())
        self.correction = Correction(low, high)
        lo, hi = _RANGES[kind]
        eps = self.epsilon
        if high > low:
            unit = (F - low) / (high - low)
        else:
            unit = np.full_like(F, 0.5)
        squeezed = (lo + eps) + unit * (hi - lo - 2 * eps)
        if kind is Kind.SIGMOID:
            return np.log(squeezed) - np.log1p(-squeezed)
        return np.arctanh(squeezed)

    def _draw_negative(self, count):
        # uniform on (-1, 0): reflect [0, 1) draws, then nudge off the endpoint
        u = self.rng.random(count)
        u[u == 0.0] = np.nextafter(0.0, 1.0)
        return -u

    def clone(self):
        return copy.deepcopy(self)


def roundtrip_check(state, F):
    """Largest ``|activate(deactivate(F)) - F|`` over entries that survive
    the backward pass unchanged in meaning.

    Entries replaced by ReLU's random draws and Softmax entries clipped at
    ``epsilon`` are excluded.  ``state`` itself is not modified.
    """
    F = np.asarray(F, dtype=np.float64)
    st = state.clone()
    mask = np.ones(F.shape, dtype=bool)
    if st.kind is Kind.RELU:
        mask = F >= 0
    elif st.kind is Kind.SOFTMAX:
        if st.log_totals is None:
            raise ActivationStateError("softmax roundtrip needs a prior forward pass")
        with np.errstate(divide="ignore"):
            mask = np.log(np.maximum(F, 0.0)) + st.log_totals > np.log(st.epsilon)
    back = st.activate(st.deactivate(F))
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(back - F)[mask]))
