"""IDX (MNIST-style) loading, seeded synthetic blobs and mini-batch plans."""
from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, FormatError, ParameterError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    classes: int

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ConsistencyError("feature and label counts differ")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.classes):
            raise ConsistencyError("label outside [0, classes)")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx], self.classes)


def _open(path, mode):
    # mtime=0 keeps gzip output byte-stable
    if str(path).endswith(".gz"):
        return gzip.GzipFile(path, mode, mtime=0)
    return open(path, mode)


def _read(path):
    with _open(path, "rb") as f:
        return f.read()


def _parse_idx(raw, magic, path):
    if len(raw) < 4:
        raise OSError(f"{path}: truncated header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise OSError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise OSError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path, classes=None):
    """Load an IDX image/label pair; pixels scaled to [0, 1], images flattened row-major."""
    images = _parse_idx(_read(images_path), IMAGES_MAGIC, images_path)
    labels = _parse_idx(_read(labels_path), LABELS_MAGIC, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    if classes is None:
        classes = int(labels.max()) + 1 if labels.size else 1
    return Dataset(features, labels, classes)


def write_idx(dataset, images_path, labels_path, shape=None):
    """Inverse of :func:`load_idx` for features that are multiples of 1/255."""
    n, d = dataset.features.shape
    if shape is None:
        side = math.isqrt(d)
        shape = (side, side) if side * side == d else (1, d)
    if shape[0] * shape[1] != d:
        raise ParameterError(f"image shape {shape} does not hold {d} features")
    pixels = np.rint(dataset.features * 255.0).astype(np.uint8)
    with _open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, n, *shape))
        f.write(pixels.tobytes())
    with _open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, n))
        f.write(dataset.labels.astype(np.uint8).tobytes())


def synth_blobs(n, d, classes, spread, seed):
    """Balanced Gaussian blobs clipped to [0, 1].

    Class means are uniform in [0.25, 0.75]^d and row ``i`` has label
    ``i % classes``, so any prefix of the rows is (near-)balanced.
    """
    if classes < 1 or n < classes or d < 1 or spread < 0:
        raise ParameterError(f"invalid blob sizes n={n} d={d} classes={classes} spread={spread}")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.25, 0.75, size=(classes, d))
    labels = np.arange(n) % classes
    noise = rng.standard_normal((n, d)) * spread
    features = np.clip(means[labels] + noise, 0.0, 1.0)
    return Dataset(features, labels.astype(np.int64), classes)


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParameterError("batch_size must be positive")


def batches(dataset, plan, epoch):
    """Index arrays for one epoch: a fresh permutation per (seed, epoch), last batch may be short."""
    n = len(dataset)
    perm = np.random.default_rng([plan.seed, epoch]).permutation(n)
    return [perm[i:i + plan.batch_size] for i in range(0, n, plan.batch_size)]
