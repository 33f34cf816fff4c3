"""MNIST IDX ingestion, complementary pixel coding and seeded splits.

IDX layout (all header integers big-endian 32-bit)::

    0x00000803  n_images  n_rows  n_cols  <n_images * n_rows * n_cols bytes>
    0x00000801  n_labels                  <n_labels bytes>

Gzip-compressed files are detected by their leading bytes and decompressed
transparently.
"""

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    CountMismatchError,
    DataError,
    TruncatedError,
    WrongKindError,
)
from .network import LayerSpec

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

STANDARD_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True, eq=False)
class Dataset:
    images: np.ndarray  # (n, rows*cols) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64 in 0..9
    image_shape: tuple = (28, 28)
    tag: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )

    def __len__(self):
        return len(self.labels)

    def subset(self, indices, tag=None):
        return Dataset(self.images[indices], self.labels[indices],
                       self.image_shape, self.tag if tag is None else tag)


def _read_bytes(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_header(raw, expected_magic, n_dims, what):
    header_len = 4 + 4 * n_dims
    if len(raw) < 4:
        raise TruncatedError(f"{what}: file too short for a magic number", len(raw))
    (magic,) = struct.unpack_from(">I", raw, 0)
    if magic != expected_magic:
        if magic in (IMAGES_MAGIC, LABELS_MAGIC):
            other = "labels" if magic == LABELS_MAGIC else "images"
            raise WrongKindError(
                f"{what}: magic 0x{magic:08x} belongs to an IDX {other} file", 0
            )
        raise BadMagicError(f"{what}: bad magic 0x{magic:08x}", 0)
    if len(raw) < header_len:
        raise TruncatedError(f"{what}: truncated header", len(raw))
    dims = struct.unpack_from(">" + "I" * n_dims, raw, 4)
    payload = int(np.prod(dims))
    if len(raw) < header_len + payload:
        raise TruncatedError(
            f"{what}: payload needs {payload} bytes, found {len(raw) - header_len}",
            len(raw),
        )
    if len(raw) > header_len + payload:
        raise DataError(
            f"{what}: {len(raw) - header_len - payload} trailing bytes "
            f"after offset {header_len + payload}"
        )
    data = np.frombuffer(raw, dtype=np.uint8, offset=header_len, count=payload)
    return dims, data


def parse_idx_images(raw):
    (n, rows, cols), data = _parse_header(raw, IMAGES_MAGIC, 3, "images")
    return data.reshape(n, rows * cols), (rows, cols)


def parse_idx_labels(raw):
    (n,), data = _parse_header(raw, LABELS_MAGIC, 1, "labels")
    return data


def load_idx(images_path, labels_path, tag=""):
    pixels, shape = parse_idx_images(_read_bytes(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path))
    if len(pixels) != len(labels):
        # offset of the label count field
        raise CountMismatchError(
            f"{labels_path}: {len(labels)} labels for {len(pixels)} images", 4
        )
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DataError(f"{labels_path}: label {labels[bad]} at byte offset {8 + bad}")
    return Dataset(pixels / 255.0, labels.astype(np.int64), shape, tag)


def idx_bytes(array):
    """Serialize a uint8 array as uncompressed IDX (images if 3-d, labels if 1-d)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = {3: IMAGES_MAGIC, 1: LABELS_MAGIC}[array.ndim]
    header = struct.pack(">I" + "I" * array.ndim, magic, *array.shape)
    return header + array.tobytes()


def to_idx(dataset):
    """Inverse of :func:`load_idx` for 8-bit data: ``(image_bytes, label_bytes)``."""
    pixels = np.rint(dataset.images * 255.0).astype(np.uint8)
    pixels = pixels.reshape((len(dataset),) + tuple(dataset.image_shape))
    return idx_bytes(pixels), idx_bytes(dataset.labels.astype(np.uint8))


def find_split_files(mnist_dir, kind="train"):
    paths = []
    for name in STANDARD_FILES[kind]:
        for candidate in (name, name + ".gz"):
            path = os.path.join(mnist_dir, candidate)
            if os.path.exists(path):
                paths.append(path)
                break
        else:
            raise DataError(f"missing {name}[.gz] in {mnist_dir}")
    return paths


def load_mnist_dir(mnist_dir, kind="train"):
    images_path, labels_path = find_split_files(mnist_dir, kind)
    return load_idx(images_path, labels_path, tag=kind)


def input_layer(n_pixels=784):
    return LayerSpec(n_pixels, 2)


def encode_sample(intensities):
    """Binary hypercolumn per pixel with activities ``(v, 1 - v)``.

    Works on a single image ``(n_pixels,)`` or a batch ``(n, n_pixels)``.
    """
    v = np.asarray(intensities, dtype=np.float64)
    if v.size and (v.min() < 0.0 or v.max() > 1.0 or np.isnan(v).any()):
        raise DataError("pixel intensities must lie in [0, 1]")
    out = np.empty(v.shape + (2,))
    out[..., 0] = v
    out[..., 1] = 1.0 - v
    return out.reshape(v.shape[:-1] + (2 * v.shape[-1],))


def split(dataset, n_train, n_val, seed):
    """Disjoint random train/validation subsets from one seeded permutation.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n_train < 0 or n_val < 0 or n_train + n_val > len(dataset):
        raise DataError(
            f"cannot draw {n_train} + {n_val} samples from {len(dataset)}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(len(dataset))
    return (dataset.subset(order[:n_train], "train"),
            dataset.subset(order[n_train:n_train + n_val], "validation"))
