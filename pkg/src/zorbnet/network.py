"""Layers, networks and forward propagation.

Data flows through a network as a ``(features, n_samples)`` matrix.  Image
batches use the same layout: each column is one image flattened in
``(height, width, channel)`` row-major order.  Convolutions are computed as
one matrix product against a matrix of stacked patches (im2col).

Patch matrix layout (shared by :func:`extract_patches`,
:func:`fold_patches` and the conv solve):

* rows: ``kernel_h * kernel_w * channels`` entries of one patch, in
  ``(kh, kw, c)`` row-major order;
* columns: sample-major, then patch positions in row-major order, i.e.
  column ``s * p + (r * out_w + q)`` is the patch of sample ``s`` whose top
  left corner sits at ``(r * stride, q * stride)``.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .activations import Activation, Kind
from .errors import ContractViolation


@dataclass
class Dense:
    W: np.ndarray  # (d_out, d_in)
    b: np.ndarray  # (d_out, 1)
    n_updates: int = field(default=0, compare=False)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1, 1)
        if self.W.ndim != 2 or self.b.shape[0] != self.W.shape[0]:
            raise ContractViolation(
                f"dense layer has W {self.W.shape} and b {self.b.shape}"
            )

    @property
    def in_dim(self):
        return self.W.shape[1]

    @property
    def out_dim(self):
        return self.W.shape[0]

    def set_params(self, W, b):
        self.W = np.asarray(W, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64).reshape(-1, 1)
        self.n_updates += 1

    def forward(self, X):
        if X.shape[0] != self.in_dim:
            raise ContractViolation(
                f"dense layer expects {self.in_dim} input rows, got {X.shape[0]}"
            )
        return self.W @ X + self.b


def _output_size(size, k, stride):
    return (size - k) // stride + 1


@dataclass
class Conv:
    """Valid-padding 2-D convolution.  Each row of ``filters`` is one filter
    reshaped in ``(kh, kw, c_in)`` order."""

    filters: np.ndarray  # (num_filters, kh * kw * c_in)
    bias: np.ndarray  # (num_filters, 1)
    kernel: tuple
    input_geometry: tuple  # (height, width, channels)
    stride: int = 1
    n_updates: int = field(default=0, compare=False)

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1, 1)
        self.kernel = tuple(int(k) for k in self.kernel)
        self.input_geometry = tuple(int(g) for g in self.input_geometry)
        self.stride = int(self.stride)
        check_geometry(self.input_geometry, self.kernel, self.stride)
        kh, kw = self.kernel
        expected = kh * kw * self.input_geometry[2]
        if self.filters.ndim != 2 or self.filters.shape[1] != expected:
            raise ContractViolation(
                f"filter rows must have length {expected}, got {self.filters.shape}"
            )
        if self.bias.shape[0] != self.filters.shape[0]:
            raise ContractViolation("one bias per filter required")

    @property
    def num_filters(self):
        return self.filters.shape[0]

    @property
    def output_geometry(self):
        h, w, _ = self.input_geometry
        kh, kw = self.kernel
        return (
            _output_size(h, kh, self.stride),
            _output_size(w, kw, self.stride),
            self.num_filters,
        )

    @property
    def in_dim(self):
        return int(np.prod(self.input_geometry))

    @property
    def out_dim(self):
        return int(np.prod(self.output_geometry))

    @property
    def positions(self):
        oh, ow, _ = self.output_geometry
        return oh * ow

    def set_params(self, filters, bias):
        self.filters = np.asarray(filters, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64).reshape(-1, 1)
        self.n_updates += 1

    def forward(self, X):
        return conv_forward(self, X)

    def patches(self, X):
        return extract_patches(X, self.input_geometry, self.kernel, self.stride)

    def to_filter_rows(self, Z):
        """``(positions * num_filters, n)`` -> ``(num_filters, n * positions)``."""
        n = Z.shape[1]
        return (
            Z.T.reshape(n, self.positions, self.num_filters)
            .transpose(2, 0, 1)
            .reshape(self.num_filters, n * self.positions)
        )

    def from_filter_rows(self, R):
        """Inverse of :meth:`to_filter_rows`."""
        n = R.shape[1] // self.positions
        return (
            R.reshape(self.num_filters, n, self.positions)
            .transpose(1, 2, 0)
            .reshape(n, self.positions * self.num_filters)
            .T
        )


@dataclass
class Flatten:
    """Marks the switch from image geometry to plain feature vectors.

    Because image columns are already flattened in ``(h, w, c)`` order this
    is a no-op on the data; it only carries the geometry."""

    geometry: tuple

    def __post_init__(self):
        self.geometry = tuple(int(g) for g in self.geometry)

    @property
    def in_dim(self):
        return int(np.prod(self.geometry))

    out_dim = in_dim

    def forward(self, X):
        if X.shape[0] != self.in_dim:
            raise ContractViolation(
                f"flatten expects {self.in_dim} rows for geometry {self.geometry}, "
                f"got {X.shape[0]}"
            )
        return X


def is_trainable(layer):
    return isinstance(layer, (Dense, Conv))


@dataclass
class Network:
    layers: list = field(default_factory=list)
    input_dim: int | None = None
    input_geometry: tuple | None = None

    def __post_init__(self):
        if self.input_geometry is not None:
            self.input_geometry = tuple(int(g) for g in self.input_geometry)
            if self.input_dim is None:
                self.input_dim = int(np.prod(self.input_geometry))
        if self.input_dim is None and self.layers:
            first = next((l for l in self.layers if not isinstance(l, Activation)), None)
            if first is not None:
                self.input_dim = first.in_dim
        self.validate()

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __getitem__(self, i):
        return self.layers[i]

    @property
    def output_dim(self):
        dim = self.input_dim
        for layer in self.layers:
            if not isinstance(layer, Activation):
                dim = layer.out_dim
        return dim

    @property
    def activations(self):
        return [l for l in self.layers if isinstance(l, Activation)]

    def validate(self):
        dim = self.input_dim
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Activation):
                if layer.kind is Kind.SOFTMAX and i != len(self.layers) - 1:
                    raise ContractViolation("softmax is only supported as the output layer")
                continue
            if dim is not None and layer.in_dim != dim:
                raise ContractViolation(
                    f"layer {i} ({type(layer).__name__}) expects {layer.in_dim} "
                    f"inputs, previous layer gives {dim}"
                )
            dim = layer.out_dim

    def reset_state(self, seed=0):
        """Clear stored activation corrections and reseed their generators."""
        seeds = np.random.SeedSequence(seed).spawn(len(self.layers))
        for layer, ss in zip(self.layers, seeds):
            if isinstance(layer, Activation):
                layer.reset()
                layer.reseed(int(ss.generate_state(1)[0]))


def forward(net, X, start=0, stop=None):
    """Run ``X`` through ``net.layers[start:stop]``."""
    X = np.asarray(X, dtype=np.float64)
    for layer in net.layers[start:stop]:
        if isinstance(layer, Activation):
            X = layer.activate(X)
        else:
            X = layer.forward(X)
    return X


def predict(net, X, batch_size=None):
    """Forward pass in column chunks to bound memory on big conv inputs."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    if batch_size is None or n <= batch_size:
        return forward(net, X)
    return np.hstack(
        [forward(net, X[:, i : i + batch_size]) for i in range(0, n, batch_size)]
    )


# -- convolution machinery ------------------------------------------------


def check_geometry(geometry, kernel, stride):
    if len(geometry) != 3 or min(geometry) < 1:
        raise ContractViolation(f"geometry must be (height, width, channels), got {geometry}")
    if len(kernel) != 2 or min(kernel) < 1:
        raise ContractViolation(f"kernel must be (kh, kw), got {kernel}")
    if stride < 1:
        raise ContractViolation(f"stride must be >= 1, got {stride}")
    h, w, _ = geometry
    if kernel[0] > h or kernel[1] > w:
        raise ContractViolation(f"kernel {kernel} larger than image {geometry[:2]}")


def _images(X, geometry):
    X = np.asarray(X, dtype=np.float64)
    h, w, c = geometry
    if X.ndim != 2 or X.shape[0] != h * w * c:
        raise ContractViolation(
            f"image batch must have {h * w * c} rows for geometry {geometry}, "
            f"got shape {X.shape}"
        )
    return X.T.reshape(X.shape[1], h, w, c)


def extract_patches(X, geometry, kernel=(3, 3), stride=1):
    """Stack every ``kernel``-sized patch of every image as a column.

    Returns a ``(kh * kw * c, n * p)`` matrix in the layout described in the
    module docstring.
    """
    geometry = tuple(geometry)
    kernel = tuple(kernel)
    check_geometry(geometry, kernel, stride)
    imgs = _images(X, geometry)
    kh, kw = kernel
    win = sliding_window_view(imgs, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    n, oh, ow, c = win.shape[:4]
    # (n, oh, ow, c, kh, kw) -> (n, oh, ow, kh, kw, c)
    win = win.transpose(0, 1, 2, 4, 5, 3)
    return win.reshape(n * oh * ow, kh * kw * c).T.copy()


def fold_patches(P, geometry, kernel=(3, 3), stride=1):
    """Scatter patch columns back into images, averaging overlaps.

    Each pixel becomes the mean of every patch entry that covers it.  Pixels
    covered by no patch (possible with stride > kernel) are set to zero.
    """
    geometry = tuple(geometry)
    kernel = tuple(kernel)
    check_geometry(geometry, kernel, stride)
    h, w, c = geometry
    kh, kw = kernel
    oh, ow = _output_size(h, kh, stride), _output_size(w, kw, stride)
    P = np.asarray(P, dtype=np.float64)
    p = oh * ow
    if P.ndim != 2 or P.shape[0] != kh * kw * c or P.shape[1] % p:
        raise ContractViolation(
            f"patch matrix of shape {P.shape} does not match geometry {geometry}, "
            f"kernel {kernel}, stride {stride}"
        )
    n = P.shape[1] // p
    patches = P.T.reshape(n, oh, ow, kh, kw, c)
    sums = np.zeros((n, h, w, c))
    counts = np.zeros((h, w))
    for i in range(kh):
        rows = slice(i, i + stride * (oh - 1) + 1, stride)
        for j in range(kw):
            cols = slice(j, j + stride * (ow - 1) + 1, stride)
            sums[:, rows, cols, :] += patches[:, :, :, i, j, :]
            counts[rows, cols] += 1
    counts = np.where(counts > 0, counts, 1.0)
    imgs = sums / counts[None, :, :, None]
    return imgs.reshape(n, h * w * c).T.copy()


def conv_forward(layer, X):
    """``filters @ patches + bias``, returned as ``(out_h * out_w * F, n)``."""
    P = layer.patches(X)
    return layer.from_filter_rows(layer.filters @ P + layer.bias)


# -- initialization ---------------------------------------------------------


def init_dense(d_in, d_out, rng):
    """Uniform(-1, 1) weights and biases scaled by ``1/sqrt(d_in)``."""
    scale = 1.0 / np.sqrt(d_in)
    W = rng.uniform(-1.0, 1.0, size=(d_out, d_in)) * scale
    b = rng.uniform(-1.0, 1.0, size=(d_out, 1)) * scale
    return Dense(W, b)


def init_conv(geometry, num_filters, kernel, stride, rng):
    kh, kw = kernel
    fan_in = kh * kw * geometry[2]
    scale = 1.0 / np.sqrt(fan_in)
    filters = rng.uniform(-1.0, 1.0, size=(num_filters, fan_in)) * scale
    bias = rng.uniform(-1.0, 1.0, size=(num_filters, 1)) * scale
    return Conv(filters, bias, kernel, geometry, stride)


def reinitialize(net, seed):
    """Draw fresh seeded parameters for every trainable layer in place."""
    rng = np.random.default_rng(seed)
    for i, layer in enumerate(net.layers):
        if isinstance(layer, Dense):
            net.layers[i] = init_dense(layer.in_dim, layer.out_dim, rng)
        elif isinstance(layer, Conv):
            net.layers[i] = init_conv(
                layer.input_geometry, layer.num_filters, layer.kernel, layer.stride, rng
            )
    net.reset_state(seed)
    return net
