"""Binary checkpoint container.

Layout: magic b"GRKN", format version (u32 LE), header length (u32 LE),
UTF-8 JSON header, then raw little-endian row-major tensor payloads in
header order.  The header carries tensor names, shapes, dtypes and any
caller metadata; round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import FormatError

MAGIC = b"GRKN"
VERSION = 1

_DTYPES = {"f8": "<f8", "f4": "<f4"}


def save(path, tensors: dict, meta: dict | None = None):
    """Write named arrays (order preserved) plus JSON metadata."""
    entries = []
    payloads = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.float64:
            code = "f8"
        elif arr.dtype == np.float32:
            code = "f4"
        else:
            raise FormatError(f"unsupported dtype {arr.dtype} for {name!r}")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": code})
        payloads.append(arr.astype(_DTYPES[code]).tobytes(order="C"))
    header = json.dumps({"tensors": entries, "meta": meta or {}}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def load(path):
    """Read a checkpoint; returns (tensors dict, meta dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise FormatError("bad checkpoint magic (expected GRKN)")
    if len(raw) < 12:
        raise FormatError("truncated checkpoint preamble")
    version, hlen = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from exc
    offset = 12 + hlen
    tensors = {}
    for entry in header["tensors"]:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(raw):
            raise FormatError("checkpoint payload truncated")
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
        offset += nbytes
    if offset != len(raw):
        raise FormatError("trailing bytes after checkpoint payload")
    return tensors, header["meta"]
