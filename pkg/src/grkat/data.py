"""Datasets for the desk-scale tasks: seeded synthetic generators plus
CSV (label,features...) and IDX file ingestion."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .model import patchify


@dataclass
class Dataset:
    tokens: np.ndarray  # [N, T, embed_dim]
    targets: np.ndarray  # int labels [N] or float targets [N, outputs]
    task: str  # classify | regress

    def __len__(self):
        return self.tokens.shape[0]


def periodic_regression(n: int = 256, seed: int = 0) -> Dataset:
    """y = sin(2 pi x) + 0.5 sin(6 pi x) on x in [-1, 1]; one token."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    y = np.sin(2 * np.pi * x) + 0.5 * np.sin(6 * np.pi * x)
    return Dataset(x.reshape(n, 1, 1), y.reshape(n, 1), "regress")


def blob_classification(n: int = 2000, classes: int = 10, img: int = 8,
                        patch: int = 4, noise: float = 0.35,
                        seed: int = 0) -> Dataset:
    """Gaussian-blob images: each class lights a class-specific pixel
    pattern; labels are the pattern index."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=1.0, size=(classes, img, img))
    labels = rng.integers(0, classes, size=n)
    images = centers[labels] + noise * rng.normal(size=(n, img, img))
    return Dataset(patchify(images, patch), labels, "classify")


def load_csv(path) -> Dataset:
    """label,feature,... rows -> single-token vectors."""
    try:
        raw = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"malformed CSV {path}: {exc}") from exc
    if raw.shape[1] < 2:
        raise FormatError("CSV needs a label column plus at least one feature")
    labels = raw[:, 0].astype(np.int64)
    feats = raw[:, 1:]
    return Dataset(feats[:, None, :], labels, "classify")


IDX_DTYPES = {0x08: np.uint8, 0x09: np.int8, 0x0B: ">i2", 0x0C: ">i4",
              0x0D: ">f4", 0x0E: ">f8"}


def load_idx(path) -> np.ndarray:
    """IDX format: 2 zero bytes, dtype code, ndim, big-endian dims, data."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise FormatError("bad IDX magic")
    code, ndim = raw[2], raw[3]
    if code not in IDX_DTYPES:
        raise FormatError(f"unknown IDX dtype code 0x{code:02x}")
    if len(raw) < 4 + 4 * ndim:
        raise FormatError("truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:4 + 4 * ndim])
    dtype = np.dtype(IDX_DTYPES[code])
    count = int(np.prod(dims))
    if len(raw) != 4 + 4 * ndim + count * dtype.itemsize:
        raise FormatError("IDX payload size mismatch")
    arr = np.frombuffer(raw, dtype=dtype, offset=4 + 4 * ndim, count=count)
    return arr.reshape(dims).astype(arr.dtype.newbyteorder("="))


def load_idx_images(images_path, labels_path, patch: int = 4,
                    limit: int | None = None) -> Dataset:
    """Pair of IDX files (images [N,H,W] u8, labels [N]) -> dataset."""
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3:
        raise FormatError("IDX image file must be 3-D [N, H, W]")
    if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
        raise FormatError("IDX label file does not match image count")
    if limit:
        images, labels = images[:limit], labels[:limit]
    tokens = patchify(images.astype(np.float64) / 255.0, patch)
    return Dataset(tokens, labels.astype(np.int64), "classify")


GENERATORS = {"periodic": periodic_regression, "blobs": blob_classification}


def load_dataset(spec: dict) -> Dataset:
    """Dispatch on spec["kind"]: periodic | blobs | csv | idx."""
    kind = spec.get("kind")
    if kind in ("periodic", "blobs"):
        kwargs = {k: v for k, v in spec.items() if k != "kind"}
        return GENERATORS[kind](**kwargs)
    if kind == "csv":
        return load_csv(spec["path"])
    if kind == "idx":
        return load_idx_images(spec["images"], spec["labels"],
                               patch=spec.get("patch", 4),
                               limit=spec.get("limit"))
    raise FormatError(f"unknown dataset kind {kind!r}")
