"""Fully connected integer networks trained by direct feedback alignment.

Forward pass per layer::

    h = trunc((a_prev @ W + b) / pre_div)
    a = actv(h)

DFA update per layer, independent of every other layer::

    delta = (error @ R) * actv'(h)
    W -= trunc((a_prev.T @ delta) / (lr_inverse * batch_div))
    b -= trunc(colsum(delta)     / (lr_inverse * batch_div))

then W and b are clamped back to [-127, 127]. ``bp_backward`` runs ordinary
backpropagation through the same integer machinery with saturating arithmetic
and counts every value that would not fit in 32 bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import activations
from .activations import Activation
from .matrix import (
    INT8_HI,
    INT8_LO,
    IntMatrix,
    Overflow,
    argmax_rows,
    clamp,
    column_sum,
    identity,
    matmul,
    overflow_policy,
    tally_scope,
    random_fill,
    scalar_trunc_div,
    sub,
    transpose,
    zeros,
)
from .rng import Rng

DEFAULT_PRE_DIV = 1024
DEFAULT_FEEDBACK_RANGE = (-1, 1)

MAGIC = b"PKNN"
FORMAT_VERSION = 1


class StateError(RuntimeError):
    pass


class FormatError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


@dataclass
class FcLayer:
    W: IntMatrix
    b: IntMatrix
    R: IntMatrix
    actv: Activation
    pre_div: int = 1
    cache_input: IntMatrix | None = None
    cache_h: IntMatrix | None = None
    cache_a: IntMatrix | None = None

    @property
    def d_in(self) -> int:
        return self.W.rows

    @property
    def d_out(self) -> int:
        return self.W.cols

    def same_params(self, other: FcLayer) -> bool:
        return (
            self.W == other.W
            and self.b == other.b
            and self.R == other.R
            and self.actv is other.actv
            and self.pre_div == other.pre_div
        )


@dataclass
class Network:
    layers: list[FcLayer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for k, (lo, hi) in enumerate(zip(self.layers, self.layers[1:])):
            if lo.d_out != hi.d_in:
                raise ValueError(f"layer {k} outputs {lo.d_out} but layer {k + 1} expects {hi.d_in}")
        for k, layer in enumerate(self.layers):
            if layer.R.shape != (self.num_classes, layer.d_out):
                raise ValueError(f"layer {k} feedback shape {layer.R.shape} != {(self.num_classes, layer.d_out)}")

    @property
    def num_classes(self) -> int:
        return self.layers[-1].d_out

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].d_in] + [layer.d_out for layer in self.layers]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a.same_params(b) for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


@dataclass
class LayerUpdate:
    delta: IntMatrix
    grad_w: IntMatrix
    grad_b: IntMatrix
    overflow_count: int = 0


@dataclass
class UpdateSummary:
    layers: list[LayerUpdate] = field(default_factory=list)

    @property
    def overflow_counts(self) -> list[int]:
        return [u.overflow_count for u in self.layers]

    @property
    def overflow_count(self) -> int:
        return sum(self.overflow_counts)


def build(
    dims: Sequence[int],
    actv: Activation = Activation.POCKET_TANH,
    pre_div: int | Sequence[int] = DEFAULT_PRE_DIV,
    rng: Rng | None = None,
    feedback_range: tuple[int, int] = DEFAULT_FEEDBACK_RANGE,
    output_feedback: str = "identity",
) -> Network:
    """Zero-initialised network with layer sizes ``dims``.

    Hidden-layer feedback matrices are drawn uniformly from ``feedback_range``.
    The output layer gets the identity (``output_feedback="identity"``) so it
    descends the true loss gradient, or a random draw (``"random"``).
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError(f"need at least input and output sizes, got {dims}")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer sizes must be positive, got {dims}")
    if output_feedback not in ("identity", "random"):
        raise ValueError(f"output_feedback must be 'identity' or 'random', got {output_feedback!r}")
    lo, hi = feedback_range
    if not INT8_LO <= lo <= hi <= INT8_HI:
        raise ValueError(f"feedback range must lie within [-127, 127], got {feedback_range}")
    n = len(dims) - 1
    divs = [int(pre_div)] * n if np.isscalar(pre_div) else [int(d) for d in pre_div]
    if len(divs) != n or any(d < 1 for d in divs):
        raise ValueError(f"pre_div must be a positive int or one per layer, got {pre_div}")
    rng = rng if rng is not None else Rng(0)
    d_n = dims[-1]
    layers = []
    for k in range(n):
        d_in, d_out = dims[k], dims[k + 1]
        if k == n - 1 and output_feedback == "identity":
            R = identity(d_n)
        else:
            R = random_fill(zeros(d_n, d_out), rng, lo, hi)
        layers.append(FcLayer(zeros(d_in, d_out), zeros(1, d_out), R, actv, divs[k]))
    return Network(layers)


def forward(net: Network, x: IntMatrix) -> IntMatrix:
    """Run the batch ``x`` through every layer, caching inputs, h and a."""
    a = x
    for layer in net.layers:
        if a.cols != layer.d_in:
            raise ValueError(f"input width {a.cols} does not match layer input {layer.d_in}")
        layer.cache_input = a
        h = matmul(a, layer.W) + layer.b
        if layer.pre_div != 1:
            h = scalar_trunc_div(h, layer.pre_div)
        layer.cache_h = h
        a = activations.apply(layer.actv, h)
        layer.cache_a = a
    return a


def predict(net: Network, x: IntMatrix) -> np.ndarray:
    """Class index per sample (argmax of the outputs, lowest index on ties)."""
    return argmax_rows(forward(net, x))


def _check_cache(net: Network, error: IntMatrix) -> None:
    for k, layer in enumerate(net.layers):
        if layer.cache_h is None or layer.cache_input is None:
            raise StateError(f"layer {k} has no cached forward pass")
        if layer.cache_h.rows != error.rows:
            raise StateError(f"layer {k} cache holds {layer.cache_h.rows} samples, error has {error.rows}")
    if error.cols != net.num_classes:
        raise ValueError(f"error width {error.cols} != {net.num_classes} classes")


def _apply_update(layer: FcLayer, grad_w: IntMatrix, grad_b: IntMatrix, divisor: int) -> None:
    layer.W = clamp(sub(layer.W, scalar_trunc_div(grad_w, divisor)), INT8_LO, INT8_HI)
    layer.b = clamp(sub(layer.b, scalar_trunc_div(grad_b, divisor)), INT8_LO, INT8_HI)


def _divisor(lr_inverse: int, batch_div: int) -> int:
    if lr_inverse < 1 or batch_div < 1:
        raise ValueError("lr_inverse and batch_div must be positive")
    return lr_inverse * batch_div


def dfa_layer_update(layer: FcLayer, error: IntMatrix) -> LayerUpdate:
    """Delta and gradients of one layer from the output error alone."""
    delta = activations.apply_slope(matmul(error, layer.R), layer.actv, layer.cache_h)
    grad_w = matmul(transpose(layer.cache_input), delta)
    return LayerUpdate(delta, grad_w, column_sum(delta))


def dfa_backward(
    net: Network,
    error: IntMatrix,
    lr_inverse: int,
    batch_div: int = 1,
    order: Sequence[int] | None = None,
) -> UpdateSummary:
    """Update every layer from ``error = yhat - y`` through its own feedback matrix.

    Layers can be visited in any ``order``; no layer reads another's state.
    """
    _check_cache(net, error)
    divisor = _divisor(lr_inverse, batch_div)
    order = range(len(net.layers)) if order is None else order
    updates: dict[int, LayerUpdate] = {}
    for k in order:
        layer = net.layers[k]
        with tally_scope() as tally:
            upd = dfa_layer_update(layer, error)
            _apply_update(layer, upd.grad_w, upd.grad_b, divisor)
        upd.overflow_count = tally.count
        updates[k] = upd
    return UpdateSummary([updates[k] for k in range(len(net.layers))])


def bp_backward(net: Network, error: IntMatrix, lr_inverse: int, batch_div: int = 1) -> UpdateSummary:
    """Integer backpropagation with saturating arithmetic.

    Deltas are propagated through the (pre-update) weight transposes. Every
    result outside int32 is clamped and counted against the layer it belongs to.
    """
    _check_cache(net, error)
    divisor = _divisor(lr_inverse, batch_div)
    n = len(net.layers)
    updates: list[LayerUpdate | None] = [None] * n
    delta = None
    for k in reversed(range(n)):
        layer = net.layers[k]
        with overflow_policy(Overflow.SATURATE, f"bp layer {k}") as tally:
            if delta is None:
                upstream = error
            else:
                upstream = matmul(delta, transpose(net.layers[k + 1].W))
            delta = activations.apply_slope(upstream, layer.actv, layer.cache_h)
            grad_w = matmul(transpose(layer.cache_input), delta)
            grad_b = column_sum(delta)
        updates[k] = LayerUpdate(delta, grad_w, grad_b, tally.count)
    for layer, upd in zip(net.layers, updates):
        _apply_update(layer, upd.grad_w, upd.grad_b, divisor)
    return UpdateSummary(updates)


def serialize(net: Network) -> bytes:
    """PKNN model bytes.

    Header: magic ``PKNN``, version (u8), layer count (u32), output width d_n
    (u32). Per layer: d_in, d_out (u32), activation code (u8), pre_div (i32),
    then W, b and R row-major as int8. Integers are big-endian.
    """
    out = bytearray(MAGIC)
    out += struct.pack(">BII", FORMAT_VERSION, len(net.layers), net.num_classes)
    for layer in net.layers:
        out += struct.pack(">IIBi", layer.d_in, layer.d_out, layer.actv.value, layer.pre_div)
        for m in (layer.W, layer.b, layer.R):
            if m.data.min() < -128 or m.data.max() > 127:
                raise ValueError("parameters outside the int8 range cannot be serialized")
            out += m.data.astype(np.int8).tobytes()
    return bytes(out)


def deserialize(data: bytes) -> Network:
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated model: need {n} bytes for {what}, {len(data) - pos} left", pos)
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    def matrix(rows: int, cols: int, what: str) -> IntMatrix:
        raw = np.frombuffer(take(rows * cols, what), dtype=np.int8)
        return IntMatrix.wrap(raw.astype(np.int32).reshape(rows, cols))

    if take(4, "magic") != MAGIC:
        raise FormatError("bad magic, not a PKNN model", 0)
    (version,) = struct.unpack(">B", take(1, "version"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", 4)
    count, d_n = struct.unpack(">II", take(8, "header"))
    if count < 1 or d_n < 1:
        raise FormatError("model header has no layers or no outputs", 5)
    layers = []
    for k in range(count):
        start = pos
        d_in, d_out, code, pre_div = struct.unpack(">IIBi", take(13, f"layer {k} header"))
        if d_in < 1 or d_out < 1 or pre_div < 1:
            raise FormatError(f"layer {k} has invalid sizes or divisor", start)
        try:
            actv = Activation(code)
        except ValueError:
            raise FormatError(f"layer {k} has unknown activation code {code}", start + 8) from None
        W = matrix(d_in, d_out, f"layer {k} weights")
        b = matrix(1, d_out, f"layer {k} biases")
        R = matrix(d_n, d_out, f"layer {k} feedback")
        layers.append(FcLayer(W, b, R, actv, pre_div))
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after the last layer", pos)
    try:
        return Network(layers)
    except ValueError as exc:
        raise FormatError(str(exc), pos) from None
