"""Benchmark datasets.

Every split is stored column-per-sample: ``train_X`` is ``(d_in, n_train)``
and ``train_Y`` is ``(d_out, n_train)``.  Synthetic sets are generated on the
fly; Iris ships with the package; Boston, MNIST and CIFAR-10 are read from
the data directory (``$ZORBNET_DATA_DIR``, default ``~/.cache/zorbnet``).
"""

import csv
import gzip
import os
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ContractViolation, DataFormatError
from .metrics import CLASSIFICATION, REGRESSION

DATA_DIR_ENV = "ZORBNET_DATA_DIR"

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CIFAR_GEOMETRY = (32, 32, 3)
_CIFAR_RECORD = 1 + 32 * 32 * 3


@dataclass
class Dataset:
    name: str
    task: str
    train_X: np.ndarray
    train_Y: np.ndarray
    test_X: np.ndarray
    test_Y: np.ndarray
    class_count: int | None = None
    geometry: tuple | None = None

    def __post_init__(self):
        for split in ("train", "test"):
            X = getattr(self, f"{split}_X")
            Y = getattr(self, f"{split}_Y")
            if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
                raise ContractViolation(
                    f"{self.name} {split}: X {X.shape} and Y {Y.shape} disagree"
                )

    @property
    def input_dim(self):
        return self.train_X.shape[0]

    @property
    def output_dim(self):
        return self.train_Y.shape[0]


def data_dir():
    return Path(os.environ.get(DATA_DIR_ENV, Path.home() / ".cache" / "zorbnet"))


# -- encoding ---------------------------------------------------------------


def one_hot(labels, k):
    """``(k, n)`` indicator matrix for integer labels in ``[0, k)``."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ContractViolation(f"labels must lie in [0, {k})")
    out = np.zeros((k, labels.size))
    out[labels, np.arange(labels.size)] = 1.0
    return out


@dataclass
class Standardizer:
    mean: np.ndarray  # (d, 1)
    scale: np.ndarray  # (d, 1)

    def apply(self, X):
        return (X - self.mean) / self.scale

    def invert(self, Z):
        return Z * self.scale + self.mean


def standardize(X, eps=1e-12):
    """Zero-mean, unit-variance rows.  Constant rows map to zero (their scale
    is replaced by 1 once the std falls under ``eps``)."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=1, keepdims=True)
    std = X.std(axis=1, keepdims=True)
    scale = np.where(std > eps, std, 1.0)
    stats = Standardizer(mean, scale)
    return stats.apply(X), stats


def _stratified_indices(labels, per_class_counts, rng):
    picks = []
    for cls, count in per_class_counts.items():
        idx = np.flatnonzero(labels == cls)
        if count > idx.size:
            raise ContractViolation(f"class {cls} has {idx.size} samples, {count} requested")
        picks.append(rng.permutation(idx)[:count])
    return np.sort(np.concatenate(picks))


# -- synthetic --------------------------------------------------------------


def sinc(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = np.sin(x[nz]) / x[nz]
    return out


def gen_sinc():
    """2001 evenly spaced training points on [-10, 10]; 6001 test points on
    [-30, -10) (3001 points) and (10, 30] (3000 points)."""
    train = np.linspace(-10.0, 10.0, 2001)
    left = -30.0 + 20.0 * np.arange(3001) / 3001
    right = 10.0 + 20.0 * np.arange(1, 3001) / 3000
    test = np.concatenate([left, right])
    return Dataset(
        "sinc",
        REGRESSION,
        train[None, :],
        sinc(train)[None, :],
        test[None, :],
        sinc(test)[None, :],
    )


def xor_label(points):
    """1 where both coordinates share a sign, else 0."""
    points = np.asarray(points, dtype=np.float64)
    return (points[0] * points[1] > 0).astype(np.float64)


def gen_xor(n_train=1000, n_test=1000, seed=0):
    """Points uniform on [-1, 1]^2 labelled by :func:`xor_label`."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(2, n_train + n_test))
    Y = xor_label(X)[None, :]
    return Dataset(
        "xor", CLASSIFICATION, X[:, :n_train], Y[:, :n_train], X[:, n_train:],
        Y[:, n_train:], class_count=2,
    )


def spiral_points(n_per_class, turns=1.5):
    """Two interleaved Archimedean spirals, the second rotated by pi.

    Point ``i`` of class 0 sits at angle ``theta = 2*pi*turns*i/(m-1)`` and
    radius ``theta`` (scaled to a unit disc); class 1 is its reflection.
    Returns ``X`` (2, 2m) and integer labels.
    """
    t = np.arange(n_per_class) / max(n_per_class - 1, 1)
    theta = 2 * np.pi * turns * t
    r = t
    a = np.stack([r * np.cos(theta), r * np.sin(theta)])
    X = np.hstack([a, -a])
    labels = np.repeat([0, 1], n_per_class)
    return X, labels


def gen_two_spirals(n_train=280, n_test=120, seed=0, turns=1.5):
    total = n_train + n_test
    if total % 2 or n_train % 2:
        raise ContractViolation("two spirals needs even split sizes")
    X, labels = spiral_points(total // 2, turns)
    rng = np.random.default_rng(seed)
    train_idx = _stratified_indices(labels, {0: n_train // 2, 1: n_train // 2}, rng)
    test_mask = np.ones(total, dtype=bool)
    test_mask[train_idx] = False
    Y = labels[None, :].astype(np.float64)
    return Dataset(
        "two_spirals", CLASSIFICATION, X[:, train_idx], Y[:, train_idx],
        X[:, test_mask], Y[:, test_mask], class_count=2,
    )


# -- CSV --------------------------------------------------------------------


@dataclass
class CsvSchema:
    """Which CSV columns are features and which one is the target.

    ``target`` is a column name or index.  For classification tasks the
    target column holds class names or integers; ``classes`` fixes the
    encoding order (sorted unique values when omitted).
    """

    target: str | int = -1
    task: str = REGRESSION
    features: list | None = None
    header: bool | None = None
    classes: list | None = None


def _read_csv_rows(path, header):
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise DataFormatError("empty CSV file", path=path)
    if header is None:
        try:
            [float(c) for c in rows[0]]
            header = False
        except ValueError:
            header = True
    names = [c.strip() for c in rows[0]] if header else None
    return names, rows[1:] if header else rows


def read_csv(path, schema):
    """Parse a CSV into ``(X (d, n), target values (n,), names)``."""
    names, rows = _read_csv_rows(path, schema.header)
    width = len(rows[0])
    col = lambda ref: names.index(ref) if isinstance(ref, str) else ref % width
    try:
        target = col(schema.target)
        features = [col(f) for f in schema.features] if schema.features else [
            i for i in range(width) if i != target
        ]
    except ValueError as exc:
        raise DataFormatError(f"unknown column: {exc}", path=path) from exc
    X = np.empty((len(features), len(rows)))
    raw_targets = []
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(f"row {r} has {len(row)} fields, expected {width}", path=path)
        try:
            X[:, r] = [float(row[i]) for i in features]
        except ValueError as exc:
            raise DataFormatError(f"row {r}: {exc}", path=path) from exc
        raw_targets.append(row[target].strip())
    if not np.all(np.isfinite(X)):
        raise DataFormatError("non-finite feature value", path=path)
    return X, raw_targets


def load_csv(path, schema, n_train=None, seed=0, name=None):
    """Load a CSV dataset and split it (stratified for classification)."""
    X, raw = read_csv(path, schema)
    n = X.shape[1]
    rng = np.random.default_rng(seed)
    name = name or Path(path).stem
    if schema.task == CLASSIFICATION:
        classes = schema.classes or sorted(set(raw))
        labels = np.array([classes.index(v) for v in raw])
        k = len(classes)
        n_train = n_train if n_train is not None else int(round(0.7 * n))
        counts = np.bincount(labels, minlength=k)
        per_class = {c: int(round(n_train * counts[c] / n)) for c in range(k)}
        train_idx = _stratified_indices(labels, per_class, rng)
        Y = one_hot(labels, k)
    else:
        try:
            Y = np.array([[float(v) for v in raw]])
        except ValueError as exc:
            raise DataFormatError(f"non-numeric target: {exc}", path=path) from exc
        k = None
        n_train = n_train if n_train is not None else int(round(0.8 * n))
        train_idx = np.sort(rng.permutation(n)[:n_train])
    test_mask = np.ones(n, dtype=bool)
    test_mask[train_idx] = False
    return Dataset(
        name, schema.task, X[:, train_idx], Y[:, train_idx], X[:, test_mask],
        Y[:, test_mask], class_count=k,
    )


IRIS_CLASSES = ["0", "1", "2"]


def load_iris(seed=0):
    """Bundled Iris, split 105/45 stratified (35/15 per class)."""
    path = resources.files("zorbnet.datasets") / "iris.csv"
    with resources.as_file(path) as p:
        schema = CsvSchema(target="species", task=CLASSIFICATION, classes=IRIS_CLASSES)
        return load_csv(p, schema, n_train=105, seed=seed, name="iris")


def load_boston(path=None, seed=0):
    """Boston Housing from CSV (13 features, target last column), split
    404/102.  Features and target are standardized with train statistics."""
    path = Path(path) if path else data_dir() / "boston.csv"
    ds = load_csv(path, CsvSchema(target=-1, task=REGRESSION), n_train=404, seed=seed,
                  name="boston")
    if ds.input_dim != 13:
        raise DataFormatError(f"expected 13 features, got {ds.input_dim}", path=path)
    Xtr, xs = standardize(ds.train_X)
    Ytr, ys = standardize(ds.train_Y)
    return Dataset("boston", REGRESSION, Xtr, Ytr, xs.apply(ds.test_X), ys.apply(ds.test_Y))


# -- IDX (MNIST) ------------------------------------------------------------

_IDX_DTYPES = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


def _open_bytes(path):
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def parse_idx(buf, expected_magic=None, path=None):
    """Decode an IDX buffer into a numpy array."""
    if len(buf) < 4:
        raise DataFormatError("truncated IDX header", offset=len(buf), path=path)
    (magic,) = struct.unpack(">I", buf[:4])
    if expected_magic is not None and magic != expected_magic:
        raise DataFormatError(
            f"bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}",
            offset=0, path=path,
        )
    if magic >> 16 != 0 or (magic >> 8) & 0xFF not in _IDX_DTYPES:
        raise DataFormatError(f"bad IDX magic 0x{magic:08x}", offset=0, path=path)
    dtype = np.dtype(_IDX_DTYPES[(magic >> 8) & 0xFF])
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise DataFormatError("truncated IDX dimensions", offset=len(buf), path=path)
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    need = header + int(np.prod(dims)) * dtype.itemsize
    if len(buf) != need:
        raise DataFormatError(
            f"IDX payload size mismatch: expected {need} bytes, got {len(buf)}",
            offset=min(len(buf), need), path=path,
        )
    return np.frombuffer(buf, dtype=dtype, offset=header).reshape(dims)


def load_idx(image_path, label_path):
    """MNIST-style image/label pair -> ``(X (rows*cols, n) in [0, 1], labels)``."""
    images = parse_idx(_open_bytes(image_path), IDX_IMAGES_MAGIC, image_path)
    labels = parse_idx(_open_bytes(label_path), IDX_LABELS_MAGIC, label_path)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels", path=label_path
        )
    X = images.reshape(images.shape[0], -1).T.astype(np.float64) / 255.0
    return X, labels.astype(np.int64)


def _find(directory, stem):
    for suffix in ("", ".gz"):
        p = Path(directory) / f"{stem}{suffix}"
        if p.exists():
            return p
    raise FileNotFoundError(f"{stem}[.gz] not found in {directory}")


def load_mnist(directory=None, n_train=None, seed=0):
    """MNIST train (60000) / test (10000) from IDX files.  ``n_train``
    draws a seeded class-stratified subsample of the training split."""
    d = Path(directory) if directory else data_dir() / "mnist"
    Xtr, ltr = load_idx(_find(d, "train-images-idx3-ubyte"), _find(d, "train-labels-idx1-ubyte"))
    Xte, lte = load_idx(_find(d, "t10k-images-idx3-ubyte"), _find(d, "t10k-labels-idx1-ubyte"))
    if n_train is not None:
        idx = stratified_subsample(ltr, n_train, 10, seed)
        Xtr, ltr = Xtr[:, idx], ltr[idx]
    return Dataset("mnist", CLASSIFICATION, Xtr, one_hot(ltr, 10), Xte, one_hot(lte, 10),
                   class_count=10)


# -- CIFAR-10 binary batches ------------------------------------------------


def _read_cifar_records(path):
    buf = Path(path).read_bytes()
    if len(buf) % _CIFAR_RECORD:
        good = len(buf) - len(buf) % _CIFAR_RECORD
        raise DataFormatError(
            f"size {len(buf)} is not a multiple of the {_CIFAR_RECORD}-byte record",
            offset=good, path=path,
        )
    rec = np.frombuffer(buf, dtype=np.uint8).reshape(-1, _CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise DataFormatError(
            f"label {labels[bad[0]]} out of range",
            offset=int(bad[0]) * _CIFAR_RECORD, path=path,
        )
    # channel-major planes -> (h, w, c) per image
    hwc = rec[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).reshape(-1, 3072)
    return hwc, labels


def _to_unit(pixels):
    return pixels.T.astype(np.float64) / 255.0


def read_cifar_batch(path):
    """One CIFAR-10 binary batch -> ``(X (3072, n) in (h, w, c) order, labels)``.

    Records are 1 label byte followed by 1024 red, 1024 green and 1024 blue
    bytes, each channel row-major.  Pixels are scaled to [0, 1].
    """
    pixels, labels = _read_cifar_records(path)
    return _to_unit(pixels), labels


def stratified_subsample(labels, n, k, seed):
    """Seeded subsample with ``n // k`` samples of each class (the first
    ``n % k`` classes get one extra)."""
    per = {c: n // k + (1 if c < n % k else 0) for c in range(k)}
    return _stratified_indices(np.asarray(labels), per, np.random.default_rng(seed))


def load_cifar10(directory=None, n_subsample=None, seed=0):
    """CIFAR-10 from the binary batches in ``directory``.

    Subsampling happens before conversion to float so the full 50000-image
    training split is never materialized as float64.
    """
    d = Path(directory) if directory else data_dir() / "cifar-10-batches-bin"
    parts = [_read_cifar_records(d / f"data_batch_{i}.bin") for i in range(1, 6)]
    ptr = np.vstack([p[0] for p in parts])
    ltr = np.concatenate([p[1] for p in parts])
    if n_subsample is not None:
        idx = stratified_subsample(ltr, n_subsample, 10, seed)
        ptr, ltr = ptr[idx], ltr[idx]
    Xte, lte = read_cifar_batch(d / "test_batch.bin")
    return Dataset("cifar10", CLASSIFICATION, _to_unit(ptr), one_hot(ltr, 10), Xte,
                   one_hot(lte, 10), class_count=10, geometry=CIFAR_GEOMETRY)


# -- fetching -----------------------------------------------------------------

_MNIST_BASE = "https://storage.googleapis.com/cvdf-datasets/mnist/"
MNIST_FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]
DEFAULT_URLS = {
    "mnist": {f"mnist/{f}": _MNIST_BASE + f for f in MNIST_FILES},
    "cifar10": {"cifar-10-binary.tar.gz": "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"},
    "boston": {
        "boston.csv": "https://raw.githubusercontent.com/selva86/datasets/master/BostonHousing.csv"
    },
}


def fetch(names, dest=None, urls=None):
    """Download dataset files into ``dest`` (the data directory by default).

    The CIFAR-10 tarball is unpacked to ``cifar-10-batches-bin/``.  Files
    already present are left alone.  Returns the list of paths written.
    """
    import shutil
    import tarfile
    import urllib.request

    dest = Path(dest) if dest else data_dir()
    urls = urls or DEFAULT_URLS
    written = []
    for name in names:
        if name not in urls:
            raise ContractViolation(f"unknown dataset {name!r}; choose from {sorted(urls)}")
        for rel, url in urls[name].items():
            target = dest / rel
            if target.exists():
                continue
            target.parent.mkdir(parents=True, exist_ok=True)
            tmp = target.with_suffix(target.suffix + ".part")
            with urllib.request.urlopen(url) as resp, open(tmp, "wb") as fh:
                shutil.copyfileobj(resp, fh)
            tmp.rename(target)
            written.append(target)
            if rel.endswith(".tar.gz"):
                # the "data" filter blocks path traversal; older Pythons lack it
                safe = {"filter": "data"} if hasattr(tarfile, "data_filter") else {}
                with tarfile.open(target) as tar:
                    tar.extractall(dest, **safe)
    return written
