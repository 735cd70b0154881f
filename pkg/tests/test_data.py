"""Synthetic dataset generators and CSV/IDX ingestion."""

import struct

import numpy as np
import pytest

from grkat.data import (blob_classification, load_csv, load_dataset, load_idx,
                        load_idx_images, periodic_regression)
from grkat.errors import FormatError


class TestGenerators:
    def test_periodic_values(self):
        ds = periodic_regression(64, seed=0)
        assert ds.tokens.shape == (64, 1, 1)
        assert ds.task == "regress"
        x = ds.tokens[:, 0, 0]
        expected = np.sin(2 * np.pi * x) + 0.5 * np.sin(6 * np.pi * x)
        assert np.allclose(ds.targets[:, 0], expected)

    def test_periodic_seed_deterministic(self):
        a, b = periodic_regression(32, seed=5), periodic_regression(32, seed=5)
        assert np.array_equal(a.tokens, b.tokens)
        assert not np.array_equal(a.tokens, periodic_regression(32, seed=6).tokens)

    def test_blobs_shapes_and_labels(self):
        ds = blob_classification(n=50, classes=7, img=8, patch=4, seed=1)
        assert ds.tokens.shape == (50, 4, 16)  # (8/4)^2 tokens of 4*4 pixels
        assert ds.task == "classify"
        assert ds.targets.min() >= 0 and ds.targets.max() < 7

    def test_blobs_noise_free_images_are_class_exemplars(self):
        a = blob_classification(n=40, classes=3, noise=0.0, seed=2)
        by_label = {}
        for tok, lab in zip(a.tokens, a.targets):
            by_label.setdefault(int(lab), []).append(tok)
        for toks in by_label.values():
            for t in toks[1:]:
                assert np.array_equal(t, toks[0])


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,0.5,0.25\n0,1.5,2.5\n")
        ds = load_csv(path)
        assert ds.tokens.shape == (2, 1, 2)
        assert list(ds.targets) == [1, 0]

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,oops\n")
        with pytest.raises(FormatError):
            load_csv(path)

    def test_needs_feature_column(self, tmp_path):
        path = tmp_path / "thin.csv"
        path.write_text("1\n2\n")
        with pytest.raises(FormatError):
            load_csv(path)


def write_idx(path, arr):
    codes = {np.dtype(np.uint8): 0x08, np.dtype(">i4"): 0x0C}
    code = codes[arr.dtype]
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, code, arr.ndim]))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


class TestIdx:
    def test_u8_images_magic_0x803(self, tmp_path):
        images = np.arange(2 * 4 * 4, dtype=np.uint8).reshape(2, 4, 4)
        path = tmp_path / "img.idx"
        write_idx(path, images)
        assert path.read_bytes()[:4] == struct.pack(">I", 0x00000803)
        loaded = load_idx(path)
        assert loaded.dtype == np.uint8
        assert np.array_equal(loaded, images)

    def test_big_endian_int(self, tmp_path):
        arr = np.array([1, -2, 300], dtype=">i4")
        path = tmp_path / "v.idx"
        write_idx(path, arr)
        assert np.array_equal(load_idx(path), [1, -2, 300])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(b"\x01\x00\x08\x01" + b"\x00" * 8)
        with pytest.raises(FormatError):
            load_idx(path)

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(bytes([0, 0, 0x08, 1]) + struct.pack(">I", 10) + b"\x00" * 3)
        with pytest.raises(FormatError):
            load_idx(path)

    def test_paired_loading(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(6, 8, 8), dtype=np.uint8)
        labels = rng.integers(0, 10, size=6, dtype=np.uint8)
        write_idx(tmp_path / "i.idx", images)
        write_idx(tmp_path / "l.idx", labels)
        ds = load_idx_images(tmp_path / "i.idx", tmp_path / "l.idx", patch=4)
        assert ds.tokens.shape == (6, 4, 16)
        assert ds.tokens.max() <= 1.0
        assert np.array_equal(ds.targets, labels)

    def test_label_count_mismatch(self, tmp_path):
        write_idx(tmp_path / "i.idx",
                  np.zeros((4, 4, 4), dtype=np.uint8))
        write_idx(tmp_path / "l.idx", np.zeros(3, dtype=np.uint8))
        with pytest.raises(FormatError):
            load_idx_images(tmp_path / "i.idx", tmp_path / "l.idx")


class TestDispatch:
    def test_kinds(self):
        assert load_dataset({"kind": "periodic", "n": 8}).task == "regress"
        assert load_dataset({"kind": "blobs", "n": 8}).task == "classify"

    def test_unknown_kind(self):
        with pytest.raises(FormatError):
            load_dataset({"kind": "imagenet"})
