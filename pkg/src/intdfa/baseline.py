"""Float64 backpropagation reference: tanh hidden layers, softmax + cross-entropy, SGD."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset
from .trainer import EpochMetrics

PIXEL_SCALE = 127.0


@dataclass
class FpNetwork:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


def glorot_network(dims, rng: np.random.Generator) -> FpNetwork:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-limit, limit, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return FpNetwork(weights, biases)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(net: FpNetwork, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Hidden activations (input first) and output logits."""
    acts = [x]
    a = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        if k == last:
            return acts, z
        a = np.tanh(z)
        acts.append(a)
    raise AssertionError("unreachable")


def loss_and_grads(net: FpNetwork, x: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its gradients for every W and b."""
    acts, logits = forward(net, x)
    p = softmax(logits)
    n = len(labels)
    loss = -np.mean(np.log(p[np.arange(n), labels]))
    delta = p
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for k in reversed(range(len(net.weights))):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.weights[k].T) * (1.0 - acts[k] ** 2)
    return loss, gw, gb


def to_float(data: Dataset) -> np.ndarray:
    return data.features.data.astype(np.float64) / PIXEL_SCALE


def evaluate(net: FpNetwork, x: np.ndarray, labels: np.ndarray) -> float:
    _, logits = forward(net, x)
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def fp_train(
    dims,
    train_data: Dataset,
    val_data: Dataset,
    epochs: int = 100,
    batch_size: int = 20,
    lr: float = 0.1,
    halve_every: int = 10,
    seed: int = 1,
    shuffle: bool = True,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
) -> tuple[FpNetwork, list[EpochMetrics]]:
    """Plain SGD; the rate halves after every ``halve_every`` epochs.

    ``epochs=0`` returns a single row (epoch 0) describing the initial network.
    """
    rng = np.random.default_rng(seed)
    net = glorot_network(dims, rng)
    x_train, y_train = to_float(train_data), train_data.labels
    x_val, y_val = to_float(val_data), val_data.labels
    n = len(y_train)
    if epochs == 0:
        loss, _, _ = loss_and_grads(net, x_train, y_train)
        return net, [EpochMetrics(0, 0, float(loss), evaluate(net, x_train, y_train), evaluate(net, x_val, y_val))]
    history = []
    for epoch in range(1, epochs + 1):
        rate = lr / 2 ** ((epoch - 1) // halve_every)
        order = rng.permutation(n) if shuffle else np.arange(n)
        total = 0.0
        correct = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, gw, gb = loss_and_grads(net, x_train[idx], y_train[idx])
            total += loss * len(idx)
            for k in range(len(net.weights)):
                net.weights[k] -= rate * gw[k]
                net.biases[k] -= rate * gb[k]
        correct = evaluate(net, x_train, y_train)
        if not all(np.isfinite(w).all() for w in net.weights):
            raise FloatingPointError(f"non-finite weights after epoch {epoch}")
        m = EpochMetrics(epoch, round(1 / rate), total / n, correct, evaluate(net, x_val, y_val))
        history.append(m)
        if on_epoch is not None:
            on_epoch(m)
    return net, history
