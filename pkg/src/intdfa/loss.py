"""Sum-of-squared-errors loss and one-hot targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix import INT8_HI, INT8_LO, IntMatrix, ShapeError, sub


@dataclass(frozen=True)
class TargetEncoding:
    num_classes: int
    hot_value: int = 127
    cold_value: int = 0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if self.hot_value == self.cold_value:
            raise ValueError("hot_value and cold_value must differ")
        for v in (self.hot_value, self.cold_value):
            if not INT8_LO <= v <= INT8_HI:
                raise ValueError(f"target value {v} outside [-127, 127]")


def one_hot(label: int, enc: TargetEncoding) -> IntMatrix:
    return one_hot_batch([label], enc)


def one_hot_batch(labels, enc: TargetEncoding) -> IntMatrix:
    """len(labels) x num_classes target matrix."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= enc.num_classes):
        bad = labels[(labels < 0) | (labels >= enc.num_classes)][0]
        raise ValueError(f"label {bad} out of range for {enc.num_classes} classes")
    hot = np.arange(enc.num_classes)[None, :] == labels[:, None]
    return IntMatrix.wrap(np.where(hot, enc.hot_value, enc.cold_value).astype(np.int32))


def l2_loss_delta(yhat: IntMatrix, y: IntMatrix) -> IntMatrix:
    """Gradient of the SSE loss with respect to the outputs: ``yhat - y``."""
    if yhat.shape != y.shape:
        raise ShapeError(f"loss shape mismatch: {yhat.shape} vs {y.shape}")
    return sub(yhat, y)


def sse_loss(yhat: IntMatrix, y: IntMatrix) -> int:
    """``sum((yhat - y)**2) / 2`` accumulated in 64 bits, truncated. Reporting only."""
    if yhat.shape != y.shape:
        raise ShapeError(f"loss shape mismatch: {yhat.shape} vs {y.shape}")
    diff = yhat.data.astype(np.int64) - y.data.astype(np.int64)
    return int(np.sum(diff * diff, dtype=np.int64)) // 2
