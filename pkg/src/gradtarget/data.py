"""Dataset ingestion: IDX image/label files and CIFAR-10 binary batches.

All pixel features are scaled to [0,1] by dividing by 255, the
maximum value of these sets. Loading is byte-exact and deterministic;
malformed files are rejected with the failing byte offset.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError

IDX_IMAGE_MAGIC = 0x00000803  # unsigned byte, 3 dimensions
IDX_LABEL_MAGIC = 0x00000801  # unsigned byte, 1 dimension
CIFAR10_RECORD_BYTES = 3073   # 1 label byte + 32*32*3 pixel bytes
PIXEL_MAX = 255.0


@dataclass
class Dataset:
    features: np.ndarray  # (n, feature_dim) float64 in [0,1]
    labels: np.ndarray    # (n,) int64 in [0, num_classes)
    num_classes: int
    name: str

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ConfigError("features must be (n, d) and labels (n,)")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ConfigError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels")
        if self.features.size and (self.features.min() < 0.0 or self.features.max() > 1.0):
            raise ConfigError("features must lie in [0,1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigError(f"labels out of range for {self.num_classes} classes")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


def _read_be32(blob: bytes, offset: int, path, what: str) -> int:
    if offset + 4 > len(blob):
        raise DataFormatError(f"{path}: truncated reading {what} at byte {offset}")
    return struct.unpack_from(">I", blob, offset)[0]


def load_idx(images_path, labels_path, name: str = "idx", num_classes: int = 10) -> Dataset:
    """Parse an IDX image/label file pair.

    Image file layout (big endian): u32 magic 0x00000803, u32 count,
    u32 rows, u32 cols, then count*rows*cols pixel bytes. Label file:
    u32 magic 0x00000801, u32 count, then count label bytes.
    """
    img_blob = Path(images_path).read_bytes()
    magic = _read_be32(img_blob, 0, images_path, "magic")
    if magic != IDX_IMAGE_MAGIC:
        raise DataFormatError(
            f"{images_path}: bad image magic 0x{magic:08x} at byte 0 "
            f"(expected 0x{IDX_IMAGE_MAGIC:08x})")
    count = _read_be32(img_blob, 4, images_path, "item count")
    rows = _read_be32(img_blob, 8, images_path, "row count")
    cols = _read_be32(img_blob, 12, images_path, "column count")
    expected = 16 + count * rows * cols
    if len(img_blob) != expected:
        raise DataFormatError(
            f"{images_path}: expected {expected} bytes for {count} images of "
            f"{rows}x{cols}, found {len(img_blob)} (mismatch at byte {min(expected, len(img_blob))})")
    pixels = np.frombuffer(img_blob, dtype=np.uint8, offset=16)

    lbl_blob = Path(labels_path).read_bytes()
    magic = _read_be32(lbl_blob, 0, labels_path, "magic")
    if magic != IDX_LABEL_MAGIC:
        raise DataFormatError(
            f"{labels_path}: bad label magic 0x{magic:08x} at byte 0 "
            f"(expected 0x{IDX_LABEL_MAGIC:08x})")
    lbl_count = _read_be32(lbl_blob, 4, labels_path, "item count")
    if len(lbl_blob) != 8 + lbl_count:
        raise DataFormatError(
            f"{labels_path}: expected {8 + lbl_count} bytes for {lbl_count} labels, "
            f"found {len(lbl_blob)} (mismatch at byte {min(8 + lbl_count, len(lbl_blob))})")
    if lbl_count != count:
        raise DataFormatError(
            f"item count mismatch: {count} images in {images_path} but "
            f"{lbl_count} labels in {labels_path}")

    features = pixels.reshape(count, rows * cols).astype(np.float64) / PIXEL_MAX
    labels = np.frombuffer(lbl_blob, dtype=np.uint8, offset=8).astype(np.int64)
    return Dataset(features=features, labels=labels, num_classes=num_classes, name=name)


def load_cifar10(batch_paths, name: str = "cifar10") -> Dataset:
    """Parse CIFAR-10 binary batches: records of 1 label byte followed
    by 3072 channel-major pixel bytes."""
    feature_chunks, label_chunks = [], []
    for path in batch_paths:
        blob = Path(path).read_bytes()
        if len(blob) == 0 or len(blob) % CIFAR10_RECORD_BYTES != 0:
            raise DataFormatError(
                f"{path}: length {len(blob)} is not a positive multiple of "
                f"{CIFAR10_RECORD_BYTES} (bad record boundary at byte "
                f"{len(blob) - len(blob) % CIFAR10_RECORD_BYTES})")
        records = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR10_RECORD_BYTES)
        label_chunks.append(records[:, 0].astype(np.int64))
        feature_chunks.append(records[:, 1:].astype(np.float64) / PIXEL_MAX)
    if not feature_chunks:
        raise ConfigError("no CIFAR-10 batch files given")
    return Dataset(features=np.concatenate(feature_chunks),
                   labels=np.concatenate(label_chunks),
                   num_classes=10, name=name)


def split_train_test(dataset: Dataset, train_size: int, test_size: int):
    """Deterministic split in file order: first train_size examples,
    then the next test_size."""
    if train_size < 1:
        raise ConfigError(f"train split must be nonempty, got {train_size}")
    if test_size < 0:
        raise ConfigError(f"test split size must be >= 0, got {test_size}")
    if train_size + test_size > len(dataset):
        raise ConfigError(
            f"split sizes {train_size}+{test_size} exceed dataset size {len(dataset)}")
    train = Dataset(features=dataset.features[:train_size].copy(),
                    labels=dataset.labels[:train_size].copy(),
                    num_classes=dataset.num_classes, name=f"{dataset.name}-train")
    test = Dataset(features=dataset.features[train_size:train_size + test_size].copy(),
                   labels=dataset.labels[train_size:train_size + test_size].copy(),
                   num_classes=dataset.num_classes, name=f"{dataset.name}-test")
    return train, test


def one_hot(label: int, num_classes: int) -> np.ndarray:
    if not 0 <= label < num_classes:
        raise ConfigError(f"label {label} out of range for {num_classes} classes")
    v = np.zeros(num_classes)
    v[label] = 1.0
    return v
