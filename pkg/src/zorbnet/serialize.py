"""Binary model file format.

All integers and floats are little-endian.  Layout::

    header:
        magic        8 bytes   b"ZORBNET\\x00"
        version      u32       FORMAT_VERSION
        layer_count  u32
        input_dim    i64       -1 when unknown
        has_geometry u8        followed by 3 x u32 (h, w, c) when 1
    per layer:
        tag          u8        1 dense, 2 activation, 3 conv, 4 flatten
        dense:       u32 rows, u32 cols, f64[rows*cols] W (row-major), f64[rows] b
        activation:  u8 kind, f64 epsilon, u64 rng_seed,
                     u8 has_correction, f64 low, f64 high,
                     u32 n_totals, f64[n_totals] log softmax totals
        conv:        u32 filters, u32 kh, u32 kw, u32 stride, u32 h, u32 w, u32 c,
                     f64[filters*kh*kw*c] filter rows, f64[filters] bias
        flatten:     u32 h, u32 w, u32 c
"""

import struct

import numpy as np

from .activations import Activation, Correction, Kind
from .errors import ModelFormatError
from .network import Conv, Dense, Flatten, Network

MAGIC = b"ZORBNET\x00"
FORMAT_VERSION = 1

_TAG_DENSE, _TAG_ACT, _TAG_CONV, _TAG_FLATTEN = 1, 2, 3, 4
_KINDS = list(Kind)


def _f64(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def serialize(net):
    out = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(net.layers))]
    out.append(struct.pack("<q", -1 if net.input_dim is None else net.input_dim))
    if net.input_geometry is None:
        out.append(struct.pack("<B", 0))
    else:
        out.append(struct.pack("<B3I", 1, *net.input_geometry))
    for layer in net.layers:
        if isinstance(layer, Dense):
            out.append(struct.pack("<BII", _TAG_DENSE, *layer.W.shape))
            out += [_f64(layer.W), _f64(layer.b)]
        elif isinstance(layer, Activation):
            c = layer.correction
            out.append(
                struct.pack(
                    "<BBdQBdd",
                    _TAG_ACT,
                    _KINDS.index(layer.kind),
                    layer.epsilon,
                    layer.rng_seed,
                    c is not None,
                    c.low if c else 0.0,
                    c.high if c else 0.0,
                )
            )
            totals = layer.log_totals if layer.log_totals is not None else np.empty(0)
            out += [struct.pack("<I", totals.size), _f64(totals)]
        elif isinstance(layer, Conv):
            out.append(
                struct.pack(
                    "<B7I",
                    _TAG_CONV,
                    layer.num_filters,
                    *layer.kernel,
                    layer.stride,
                    *layer.input_geometry,
                )
            )
            out += [_f64(layer.filters), _f64(layer.bias)]
        elif isinstance(layer, Flatten):
            out.append(struct.pack("<B3I", _TAG_FLATTEN, *layer.geometry))
        else:
            raise TypeError(f"cannot serialize layer of type {type(layer).__name__}")
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = memoryview(data)
        self.pos = 0
        self.layer = None

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ModelFormatError(
                f"truncated input: need {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left",
                self.layer,
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count, shape=None):
        arr = np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)
        return arr.reshape(shape) if shape is not None else arr


def deserialize(data):
    r = _Reader(data)
    if bytes(r.take(len(MAGIC))) != MAGIC:
        raise ModelFormatError("bad magic; not a zorbnet model file")
    version, count = r.unpack("<II")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    (input_dim,) = r.unpack("<q")
    (has_geom,) = r.unpack("<B")
    geometry = tuple(r.unpack("<3I")) if has_geom else None
    layers = []
    for i in range(count):
        r.layer = i
        (tag,) = r.unpack("<B")
        try:
            if tag == _TAG_DENSE:
                rows, cols = r.unpack("<II")
                W = r.floats(rows * cols, (rows, cols))
                b = r.floats(rows, (rows, 1))
                layers.append(Dense(W, b))
            elif tag == _TAG_ACT:
                kind, eps, seed, has_c, low, high = r.unpack("<BdQBdd")
                if kind >= len(_KINDS):
                    raise ModelFormatError(f"unknown activation code {kind}", i)
                act = Activation(_KINDS[kind], epsilon=eps, rng_seed=seed)
                if has_c:
                    act.correction = Correction(low, high)
                (nt,) = r.unpack("<I")
                if nt:
                    act.log_totals = r.floats(nt)
                layers.append(act)
            elif tag == _TAG_CONV:
                nf, kh, kw, stride, h, w, c = r.unpack("<7I")
                filters = r.floats(nf * kh * kw * c, (nf, kh * kw * c))
                bias = r.floats(nf, (nf, 1))
                layers.append(Conv(filters, bias, (kh, kw), (h, w, c), stride))
            elif tag == _TAG_FLATTEN:
                layers.append(Flatten(r.unpack("<3I")))
            else:
                raise ModelFormatError(f"unknown layer tag {tag}", i)
        except ModelFormatError:
            raise
        except (ValueError, TypeError) as exc:
            raise ModelFormatError(str(exc), i) from exc
    r.layer = None
    if r.pos != len(r.data):
        raise ModelFormatError(f"{len(r.data) - r.pos} trailing bytes after last layer")
    try:
        return Network(
            layers,
            input_dim=None if input_dim < 0 else input_dim,
            input_geometry=geometry,
        )
    except ValueError as exc:
        raise ModelFormatError(f"inconsistent network: {exc}") from exc


def save(net, path):
    with open(path, "wb") as fh:
        fh.write(serialize(net))


def load(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
