"""Epoch / mini-batch training loop for integer networks."""

from __future__ import annotations

import enum
import io
from dataclasses import asdict, dataclass
from typing import Callable, Iterator

import numpy as np

from .data import Dataset
from .loss import TargetEncoding, l2_loss_delta, one_hot_batch, sse_loss
from .matrix import IntMatrix, Overflow, argmax_rows, overflow_policy
from .network import Network, bp_backward, dfa_backward, forward, predict
from .rng import Rng

LR_INVERSE_CAP = 1 << 30
EVAL_CHUNK = 1000


class Mode(enum.Enum):
    DFA_INT = "dfa-int"
    BP_INT = "bp-int"


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 20
    lr_inverse: int = 1000
    lr_double_every: int = 10
    seed: int = 1
    mode: Mode = Mode.DFA_INT
    shuffle: bool = True
    hot_value: int = 127
    cold_value: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_inverse < 1:
            raise ValueError("lr_inverse must be >= 1")
        if self.lr_double_every < 1:
            raise ValueError("lr_double_every must be >= 1")
        self.mode = Mode(self.mode)


@dataclass
class EpochMetrics:
    epoch: int
    lr_inverse: int
    train_loss: int | float
    train_accuracy: float
    val_accuracy: float
    overflow_count: int = 0


def lr_inverse_for_epoch(cfg: TrainConfig, epoch: int) -> int:
    """Inverse learning rate for 1-based ``epoch``: doubles every ``lr_double_every`` epochs, capped at 2**30."""
    doublings = (epoch - 1) // cfg.lr_double_every
    if doublings >= 31:
        return LR_INVERSE_CAP
    return min(cfg.lr_inverse << doublings, LR_INVERSE_CAP)


def shuffle_indices(n: int, rng: Rng) -> np.ndarray:
    """Fisher-Yates permutation of range(n)."""
    if n < 1:
        raise ValueError("cannot shuffle an empty range")
    perm = list(range(n))
    # Same draws as calling rng.below(i + 1) for i = n-1 .. 1, fetched in one block.
    raw = rng.raw(n - 1).tolist()
    pos = 0
    for i in range(n - 1, 0, -1):
        width = i + 1
        limit = ((1 << 64) // width) * width
        while True:
            if pos == len(raw):
                raw.extend(rng.raw(1).tolist())
            x = raw[pos]
            pos += 1
            if x < limit:
                break
        j = x % width
        perm[i], perm[j] = perm[j], perm[i]
    return np.asarray(perm, dtype=np.int64)


def batches(order: np.ndarray, batch_size: int) -> Iterator[np.ndarray]:
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


def _check(net: Network, data: Dataset, name: str) -> None:
    if len(data) == 0:
        raise ValueError(f"{name} dataset is empty")
    if data.width != net.layers[0].d_in:
        raise ValueError(f"{name} features are {data.width} wide, network expects {net.layers[0].d_in}")
    if data.labels.max() >= net.num_classes:
        raise ValueError(f"{name} labels reach {data.labels.max()}, network has {net.num_classes} outputs")


def evaluate(net: Network, data: Dataset) -> float:
    """Fraction of samples whose predicted class equals the label."""
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    correct = 0
    for start in range(0, len(data), EVAL_CHUNK):
        x = IntMatrix.wrap(data.features.data[start:start + EVAL_CHUNK])
        correct += int(np.sum(predict(net, x) == data.labels[start:start + EVAL_CHUNK]))
    return correct / len(data)


def train(
    net: Network,
    train_data: Dataset,
    val_data: Dataset,
    cfg: TrainConfig,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
) -> list[EpochMetrics]:
    """Train ``net`` in place and return one metrics row per epoch.

    Each batch is divided by its own size, so a short final batch is averaged
    correctly. Backward passes run under saturating arithmetic and the number of
    clamped values is reported as ``overflow_count``.
    """
    _check(net, train_data, "training")
    _check(net, val_data, "validation")
    enc = TargetEncoding(net.num_classes, cfg.hot_value, cfg.cold_value)
    rng = Rng(cfg.seed)
    backward = dfa_backward if cfg.mode is Mode.DFA_INT else bp_backward
    n = len(train_data)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        lr_inverse = lr_inverse_for_epoch(cfg, epoch)
        order = shuffle_indices(n, rng) if cfg.shuffle else np.arange(n)
        total_loss = 0
        correct = 0
        overflow = 0
        for idx in batches(order, cfg.batch_size):
            x = IntMatrix.wrap(train_data.features.data[idx])
            labels = train_data.labels[idx]
            y = one_hot_batch(labels, enc)
            yhat = forward(net, x)
            total_loss += sse_loss(yhat, y)
            correct += int(np.sum(argmax_rows(yhat) == labels))
            with overflow_policy(Overflow.SATURATE, f"epoch {epoch}"):
                summary = backward(net, l2_loss_delta(yhat, y), lr_inverse, len(idx))
            overflow += summary.overflow_count
        metrics = EpochMetrics(epoch, lr_inverse, total_loss, correct / n, evaluate(net, val_data), overflow)
        history.append(metrics)
        if on_epoch is not None:
            on_epoch(metrics)
    return history


CSV_HEADER = "epoch,lr_inverse,train_loss,train_acc,val_acc,overflow_count"


def metrics_row(m: EpochMetrics) -> str:
    loss = m.train_loss if isinstance(m.train_loss, int) else f"{m.train_loss:.6f}"
    return f"{m.epoch},{m.lr_inverse},{loss},{m.train_accuracy:.6f},{m.val_accuracy:.6f},{m.overflow_count}"


def metrics_csv(history: list[EpochMetrics]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for m in history:
        buf.write(metrics_row(m) + "\n")
    return buf.getvalue()


def best_val_accuracy(history: list[EpochMetrics]) -> float:
    return max((m.val_accuracy for m in history), default=0.0)


def config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["mode"] = cfg.mode.value
    return d
