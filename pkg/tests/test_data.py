import gzip
import struct
import tarfile

import numpy as np
import pytest

from zorbnet import data
from zorbnet.data import (
    CsvSchema,
    gen_sinc,
    gen_two_spirals,
    gen_xor,
    load_cifar10,
    load_csv,
    load_iris,
    load_mnist,
    one_hot,
    parse_idx,
    read_cifar_batch,
    sinc,
    spiral_points,
    standardize,
    stratified_subsample,
    xor_label,
)
from zorbnet.errors import ContractViolation, DataFormatError


class TestSynthetic:
    def test_sinc_values(self):
        assert sinc(np.array([0.0]))[0] == 1.0
        assert abs(sinc(np.array([np.pi]))[0]) <= 1e-12

    def test_sinc_split(self):
        ds = gen_sinc()
        assert ds.train_X.shape == (1, 2001) and ds.test_X.shape == (1, 6001)
        assert ds.train_X.min() == -10 and ds.train_X.max() == 10
        x = ds.test_X[0]
        assert np.all((x >= -30) & (x <= 30))
        assert not np.any((x >= -10) & (x <= 10))
        assert np.sum(x < 0) == 3001 and x.min() == -30 and x.max() == 30

    def test_xor_labels(self):
        assert xor_label(np.array([[0.5], [0.5]]))[0] == 1
        assert xor_label(np.array([[-0.5], [0.5]]))[0] == 0

    def test_xor_split(self):
        ds = gen_xor(seed=3)
        assert ds.train_X.shape == (2, 1000) and ds.test_X.shape == (2, 1000)
        assert ds.train_Y.shape == (1, 1000)
        assert np.abs(ds.train_X).max() <= 1
        np.testing.assert_array_equal(ds.train_Y[0], xor_label(ds.train_X))

    def test_xor_deterministic(self):
        a, b = gen_xor(seed=4), gen_xor(seed=4)
        assert np.array_equal(a.train_X, b.train_X) and np.array_equal(a.test_Y, b.test_Y)
        assert not np.array_equal(a.train_X, gen_xor(seed=5).train_X)

    def test_spiral_construction(self):
        X, labels = spiral_points(50)
        assert labels[0] == 0 and X[1, 0] == 0.0  # first point sits at angle 0
        np.testing.assert_array_equal(X[:, 50:], -X[:, :50])

    def test_spiral_split(self):
        ds = gen_two_spirals(seed=1)
        assert ds.train_X.shape == (2, 280) and ds.test_X.shape == (2, 120)
        for Y in (ds.train_Y, ds.test_Y):
            assert abs(2 * Y.sum() - Y.shape[1]) <= 1

    def test_spiral_odd_split_rejected(self):
        with pytest.raises(ContractViolation):
            gen_two_spirals(n_train=281, n_test=120)


class TestEncoding:
    def test_one_hot_example(self):
        np.testing.assert_array_equal(one_hot([2], 3)[:, 0], [0, 0, 1])

    def test_one_hot_idempotent(self, rng):
        v = rng.integers(0, 5, size=40)
        oh = one_hot(v, 5)
        np.testing.assert_array_equal(one_hot(oh.argmax(axis=0), 5), oh)
        np.testing.assert_array_equal(oh.sum(axis=0), 1)

    def test_one_hot_range(self):
        with pytest.raises(ContractViolation):
            one_hot([3], 3)

    def test_standardize_constant_feature(self):
        Z, stats = standardize(np.full((1, 5), 4.2))
        np.testing.assert_array_equal(Z, 0.0)
        assert stats.scale[0, 0] == 1.0

    def test_standardize_roundtrip(self, rng):
        X = rng.normal(loc=5, scale=3, size=(4, 50))
        Z, stats = standardize(X)
        np.testing.assert_allclose(Z.mean(axis=1), 0, atol=1e-12)
        np.testing.assert_allclose(Z.std(axis=1), 1, atol=1e-12)
        assert np.max(np.abs(stats.invert(Z) - X)) <= 1e-12


class TestCsv:
    def test_iris(self):
        ds = load_iris()
        assert ds.train_X.shape == (4, 105) and ds.test_X.shape == (4, 45)
        assert ds.train_Y.shape == (3, 105)
        np.testing.assert_array_equal(ds.train_Y.sum(axis=1), [35, 35, 35])
        assert ds.class_count == 3

    def test_iris_deterministic(self):
        assert np.array_equal(load_iris(seed=2).train_X, load_iris(seed=2).train_X)

    def test_regression_csv(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("a,b,y\n" + "\n".join(f"{i},{2 * i},{3 * i}" for i in range(10)) + "\n")
        ds = load_csv(p, CsvSchema(target="y"), n_train=7)
        assert ds.train_X.shape == (2, 7) and ds.test_X.shape == (2, 3)
        np.testing.assert_array_equal(ds.train_Y, 1.5 * ds.train_X[1:])

    def test_headerless_class_names(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("".join(f"{i},{'cat' if i % 2 else 'dog'}\n" for i in range(20)))
        ds = load_csv(p, CsvSchema(target=-1, task="classification"), n_train=10)
        assert ds.class_count == 2
        np.testing.assert_array_equal(ds.train_Y.sum(axis=1), [5, 5])

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2,3\n4,5\n")
        with pytest.raises(DataFormatError):
            load_csv(p, CsvSchema())

    def test_non_numeric_feature(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2,3\n4,x,6\n")
        with pytest.raises(DataFormatError):
            load_csv(p, CsvSchema())

    def test_boston_shape(self, tmp_path, monkeypatch):
        rng = np.random.default_rng(0)
        rows = rng.normal(size=(506, 14))
        p = tmp_path / "boston.csv"
        np.savetxt(p, rows, delimiter=",")
        monkeypatch.setenv(data.DATA_DIR_ENV, str(tmp_path))
        ds = data.load_boston()
        assert ds.train_X.shape == (13, 404) and ds.test_X.shape == (13, 102)
        np.testing.assert_allclose(ds.train_Y.mean(), 0, atol=1e-12)
        np.testing.assert_allclose(ds.train_X.std(axis=1), 1, atol=1e-12)


def _idx_bytes(arr, code=0x08):
    arr = np.asarray(arr)
    head = struct.pack(">I", (code << 8) | arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    return head + arr.astype(">u1").tobytes()


class TestIdx:
    def test_roundtrip(self, rng):
        arr = rng.integers(0, 256, size=(3, 4, 5)).astype(np.uint8)
        np.testing.assert_array_equal(parse_idx(_idx_bytes(arr)), arr)

    def test_bad_magic(self, rng):
        buf = _idx_bytes(rng.integers(0, 256, size=(2, 2)))
        with pytest.raises(DataFormatError) as info:
            parse_idx(buf, expected_magic=data.IDX_IMAGES_MAGIC)
        assert info.value.offset == 0
        with pytest.raises(DataFormatError):
            parse_idx(b"\xff\xff\x08\x01" + b"\x00" * 8)

    def test_truncated(self, rng):
        buf = _idx_bytes(rng.integers(0, 256, size=(4, 3, 3)))
        with pytest.raises(DataFormatError) as info:
            parse_idx(buf[:-5])
        assert info.value.offset == len(buf) - 5
        with pytest.raises(DataFormatError):
            parse_idx(buf[:2])
        with pytest.raises(DataFormatError):
            parse_idx(buf[:9])

    def test_load_mnist_layout(self, tmp_path, rng):
        imgs = rng.integers(0, 256, size=(30, 28, 28)).astype(np.uint8)
        labels = np.arange(30) % 10
        test_imgs = imgs[:10]
        (tmp_path / "train-images-idx3-ubyte.gz").write_bytes(gzip.compress(_idx_bytes(imgs)))
        (tmp_path / "train-labels-idx1-ubyte").write_bytes(_idx_bytes(labels))
        (tmp_path / "t10k-images-idx3-ubyte").write_bytes(_idx_bytes(test_imgs))
        (tmp_path / "t10k-labels-idx1-ubyte").write_bytes(_idx_bytes(labels[:10]))
        ds = load_mnist(tmp_path)
        assert ds.train_X.shape == (784, 30) and ds.test_X.shape == (784, 10)
        np.testing.assert_allclose(ds.train_X[:, 7], imgs[7].reshape(-1) / 255.0)
        assert ds.train_X.min() >= 0 and ds.train_X.max() <= 1
        sub = load_mnist(tmp_path, n_train=10, seed=1)
        np.testing.assert_array_equal(sub.train_Y.sum(axis=1), np.ones(10))

    def test_label_count_mismatch(self, tmp_path, rng):
        (tmp_path / "i").write_bytes(_idx_bytes(rng.integers(0, 256, size=(3, 2, 2))))
        (tmp_path / "l").write_bytes(_idx_bytes(np.arange(2)))
        with pytest.raises(DataFormatError):
            data.load_idx(tmp_path / "i", tmp_path / "l")


def _cifar_file(path, labels, rng):
    planes = rng.integers(0, 256, size=(len(labels), 3, 32, 32)).astype(np.uint8)
    recs = np.hstack([np.asarray(labels, dtype=np.uint8)[:, None], planes.reshape(len(labels), -1)])
    path.write_bytes(recs.tobytes())
    return planes


class TestCifar:
    def test_record_layout(self, tmp_path, rng):
        planes = _cifar_file(tmp_path / "b.bin", [3, 7], rng)
        X, labels = read_cifar_batch(tmp_path / "b.bin")
        assert X.shape == (3072, 2)
        np.testing.assert_array_equal(labels, [3, 7])
        img = X[:, 1].reshape(32, 32, 3)
        assert img[5, 9, 2] == planes[1, 2, 5, 9] / 255.0
        assert img[31, 0, 0] == planes[1, 0, 31, 0] / 255.0

    def test_truncated_record(self, tmp_path, rng):
        _cifar_file(tmp_path / "b.bin", [1, 2], rng)
        buf = (tmp_path / "b.bin").read_bytes()
        (tmp_path / "b.bin").write_bytes(buf[:-100])
        with pytest.raises(DataFormatError) as info:
            read_cifar_batch(tmp_path / "b.bin")
        assert info.value.offset == 3073

    def test_bad_label(self, tmp_path, rng):
        _cifar_file(tmp_path / "b.bin", [1, 12], rng)
        with pytest.raises(DataFormatError) as info:
            read_cifar_batch(tmp_path / "b.bin")
        assert info.value.offset == 3073

    def test_load_and_stratify(self, tmp_path, rng):
        for i in range(1, 6):
            _cifar_file(tmp_path / f"data_batch_{i}.bin", np.arange(20) % 10, rng)
        _cifar_file(tmp_path / "test_batch.bin", np.arange(10), rng)
        ds = load_cifar10(tmp_path, n_subsample=10, seed=0)
        assert ds.geometry == (32, 32, 3)
        assert ds.train_X.shape == (3072, 10) and ds.test_X.shape == (3072, 10)
        np.testing.assert_array_equal(ds.train_Y.sum(axis=1), np.ones(10))
        full = load_cifar10(tmp_path)
        assert full.train_X.shape == (3072, 100)

    def test_stratified_subsample(self):
        labels = np.repeat(np.arange(10), 50)
        idx = stratified_subsample(labels, 23, 10, seed=0)
        counts = np.bincount(labels[idx], minlength=10)
        assert counts.sum() == 23 and counts.max() - counts.min() <= 1
        np.testing.assert_array_equal(idx, stratified_subsample(labels, 23, 10, seed=0))


class TestFetch:
    def test_file_urls(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        (src / "boston.csv").write_text("1,2\n")
        inner = src / "cifar-10-batches-bin"
        inner.mkdir()
        (inner / "test_batch.bin").write_bytes(b"\x00" * 3073)
        with tarfile.open(src / "c.tar.gz", "w:gz") as tar:
            tar.add(inner, arcname="cifar-10-batches-bin")
        urls = {
            "boston": {"boston.csv": (src / "boston.csv").as_uri()},
            "cifar10": {"cifar-10-binary.tar.gz": (src / "c.tar.gz").as_uri()},
        }
        dest = tmp_path / "dest"
        written = data.fetch(["boston", "cifar10"], dest, urls)
        assert (dest / "boston.csv").read_text() == "1,2\n"
        assert (dest / "cifar-10-batches-bin" / "test_batch.bin").stat().st_size == 3073
        assert len(written) == 2
        # second call finds everything in place
        assert data.fetch(["boston"], dest, urls) == []

    def test_unknown_name(self, tmp_path):
        with pytest.raises(ContractViolation):
            data.fetch(["imagenet"], tmp_path)

    def test_data_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(data.DATA_DIR_ENV, str(tmp_path))
        assert data.data_dir() == tmp_path
