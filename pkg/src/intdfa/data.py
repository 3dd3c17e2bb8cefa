"""IDX (MNIST / Fashion-MNIST) readers and writers.

IDX layout, big-endian::

    images: u32 magic 0x00000803, u32 count, u32 rows, u32 cols, count*rows*cols u8
    labels: u32 magic 0x00000801, u32 count, count u8

Files must already be decompressed.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrix import IntMatrix

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
DATA_DIR_ENV = "INTDFA_DATA_DIR"

# Standard file names inside a dataset directory.
TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
VAL_IMAGES = "t10k-images-idx3-ubyte"
VAL_LABELS = "t10k-labels-idx1-ubyte"


class IdxFormatError(ValueError):
    pass


class IdxTruncatedError(IdxFormatError):
    def __init__(self, path, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{path}: truncated, expected {expected} bytes, found {actual}")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: IntMatrix
    labels: np.ndarray

    def __post_init__(self):
        if len(self.labels) != self.features.rows:
            raise DataError(f"{self.features.rows} images but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def width(self) -> int:
        return self.features.cols

    def subset(self, n: int) -> Dataset:
        """The first ``n`` samples."""
        if n < 1:
            raise DataError("subset size must be positive")
        return Dataset(IntMatrix.wrap(self.features.data[:n]), self.labels[:n])


def _read(path) -> bytes:
    return Path(path).read_bytes()


def _header(blob: bytes, path, magic: int, ndims: int) -> tuple[int, ...]:
    need = 4 * (1 + ndims)
    if len(blob) < need:
        raise IdxTruncatedError(path, need, len(blob))
    (found,) = struct.unpack(">I", blob[:4])
    if found != magic:
        raise IdxFormatError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    return struct.unpack(f">{ndims}I", blob[4:need])


def load_idx_images(path) -> np.ndarray:
    """Raw pixels as an N x (rows*cols) uint8 array."""
    blob = _read(path)
    count, rows, cols = _header(blob, path, IMAGE_MAGIC, 3)
    expected = 16 + count * rows * cols
    if len(blob) < expected:
        raise IdxTruncatedError(path, expected, len(blob))
    return np.frombuffer(blob, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows * cols)


def load_idx_labels(path, num_classes: int = 10) -> np.ndarray:
    blob = _read(path)
    (count,) = _header(blob, path, LABEL_MAGIC, 1)
    expected = 8 + count
    if len(blob) < expected:
        raise IdxTruncatedError(path, expected, len(blob))
    labels = np.frombuffer(blob, dtype=np.uint8, count=count, offset=8).astype(np.int64)
    if count and labels.max() >= num_classes:
        i = int(np.argmax(labels >= num_classes))
        raise DataError(f"{path}: label {labels[i]} at index {i} is not below {num_classes}")
    return labels


def rescale_pixels(raw: np.ndarray) -> IntMatrix:
    """Map byte pixels [0, 255] to [0, 127] by truncating division by 2."""
    raw = np.asarray(raw)
    if raw.size and (raw.min() < 0 or raw.max() > 255):
        raise DataError("pixel values must lie in [0, 255]")
    return IntMatrix.wrap((raw.astype(np.int32) // 2).reshape(raw.shape[0], -1))


def load_dataset(images_path, labels_path, num_classes: int = 10) -> Dataset:
    raw = load_idx_images(images_path)
    labels = load_idx_labels(labels_path, num_classes)
    if len(raw) != len(labels):
        raise DataError(f"{images_path} holds {len(raw)} images but {labels_path} holds {len(labels)} labels")
    if len(raw) == 0:
        raise DataError(f"{images_path} holds no images")
    return Dataset(rescale_pixels(raw), labels)


def dataset_paths(directory) -> dict[str, Path]:
    d = Path(directory)
    return {
        "train_images": d / TRAIN_IMAGES,
        "train_labels": d / TRAIN_LABELS,
        "val_images": d / VAL_IMAGES,
        "val_labels": d / VAL_LABELS,
    }


def default_data_dir() -> Path | None:
    value = os.environ.get(DATA_DIR_ENV)
    return Path(value) if value else None


def write_idx_images(path, images: np.ndarray, rows: int, cols: int) -> None:
    images = np.asarray(images, dtype=np.uint8).reshape(len(images), rows * cols)
    Path(path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, len(images), rows, cols) + images.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", LABEL_MAGIC, len(labels)) + labels.tobytes())
