"""Binary checkpoint format: round trips and corruption handling."""

import json
import struct

import numpy as np
import pytest

from grkat import checkpoint as ckpt
from grkat.errors import FormatError


@pytest.fixture
def tensors(tmp_path):
    rng = np.random.default_rng(0)
    return {
        "w": rng.normal(size=(7, 3)),
        "b": rng.normal(size=3),
        "single": np.float32(rng.normal(size=(2, 2, 2))).astype(np.float32),
    }


def test_round_trip_bit_exact(tmp_path, tensors):
    path = tmp_path / "m.grkn"
    ckpt.save(path, tensors, meta={"note": "x"})
    loaded, meta = ckpt.load(path)
    assert meta["note"] == "x"
    assert set(loaded) == set(tensors)
    for name, arr in tensors.items():
        assert loaded[name].dtype == arr.dtype
        assert np.array_equal(
            loaded[name].view(np.uint8), arr.view(np.uint8))


def test_header_layout(tmp_path, tensors):
    path = tmp_path / "m.grkn"
    ckpt.save(path, tensors)
    raw = path.read_bytes()
    assert raw[:4] == b"GRKN"
    version, header_len = struct.unpack("<II", raw[4:12])
    assert version == 1
    header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    names = [t["name"] for t in header["tensors"]]
    assert names == list(tensors)
    payload = sum(int(np.prod(t["shape"])) * np.dtype(t["dtype"]).itemsize
                  for t in header["tensors"])
    assert len(raw) == 12 + header_len + payload


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.grkn"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(FormatError):
        ckpt.load(path)


def test_truncated_payload(tmp_path, tensors):
    path = tmp_path / "m.grkn"
    ckpt.save(path, tensors)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        ckpt.load(path)


def test_corrupt_header(tmp_path, tensors):
    path = tmp_path / "m.grkn"
    ckpt.save(path, tensors)
    raw = bytearray(path.read_bytes())
    raw[14] ^= 0xFF  # flip a byte inside the JSON header
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        ckpt.load(path)


def test_empty_file(tmp_path):
    path = tmp_path / "empty.grkn"
    path.write_bytes(b"")
    with pytest.raises(FormatError):
        ckpt.load(path)
