"""Pocket activations: 8-bit piecewise-linear sigmoid, tanh and clamped ReLU.

Each function is a list of pieces ``(upper, mul, div, offset)`` meaning

    f(x) = trunc(x * mul / div) + offset    for  previous_upper < x <= upper

The last piece has ``upper = None`` (unbounded). The slope of a piece is the
rational ``mul / div``; constant pieces have ``mul = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .matrix import IntMatrix, ShapeError, narrow, trunc_div, trunc_div_array


class Activation(enum.Enum):
    POCKET_SIGMOID = 1
    POCKET_TANH = 2
    POCKET_RELU8 = 3

    @property
    def cli_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> Activation:
        try:
            return cls[name.upper()]
        except KeyError:
            names = ", ".join(a.cli_name for a in cls)
            raise ValueError(f"unknown activation {name!r}; expected one of {names}") from None


@dataclass(frozen=True)
class Slope:
    num: int
    den: int

    def __post_init__(self):
        if self.den < 1 or self.num < 0:
            raise ValueError(f"invalid slope {self.num}/{self.den}")


_PIECES = {
    Activation.POCKET_SIGMOID: (
        (-128, 0, 1, 1),
        (-75, 1, 8, 20),
        (-32, 1, 2, 48),
        (31, 1, 1, 64),
        (74, 1, 2, 80),
        (127, 1, 8, 108),
        (None, 0, 1, 127),
    ),
    Activation.POCKET_TANH: (
        (-128, 0, 1, -127),
        (-75, 1, 4, -88),
        (-32, 1, 1, -32),
        (31, 2, 1, 0),
        (74, 1, 1, 32),
        (127, 1, 4, 88),
        (None, 0, 1, 127),
    ),
    Activation.POCKET_RELU8: (
        (0, 0, 1, 0),
        (127, 1, 1, 0),
        (None, 0, 1, 127),
    ),
}


def _piece(kind: Activation, x: int):
    for piece in _PIECES[kind]:
        if piece[0] is None or x <= piece[0]:
            return piece
    raise AssertionError("unreachable")


def _scalar(kind: Activation, x: int) -> int:
    _, mul, div, offset = _piece(kind, x)
    return trunc_div(x * mul, div) + offset


def pocket_sigmoid(x: int) -> int:
    return _scalar(Activation.POCKET_SIGMOID, x)


def pocket_tanh(x: int) -> int:
    return _scalar(Activation.POCKET_TANH, x)


def pocket_relu8(x: int) -> int:
    return _scalar(Activation.POCKET_RELU8, x)


def slope(kind: Activation, x: int) -> Slope:
    _, mul, div, _ = _piece(kind, x)
    return Slope(mul, div)


def _piece_index(kind: Activation, x: np.ndarray) -> np.ndarray:
    uppers = [p[0] for p in _PIECES[kind][:-1]]
    return np.searchsorted(np.asarray(uppers, dtype=np.int64), x, side="left")


def _tables(kind: Activation):
    pieces = _PIECES[kind]
    mul = np.asarray([p[1] for p in pieces], dtype=np.int64)
    div = np.asarray([p[2] for p in pieces], dtype=np.int64)
    off = np.asarray([p[3] for p in pieces], dtype=np.int64)
    return mul, div, off


def apply_array(kind: Activation, h: np.ndarray) -> np.ndarray:
    x = np.asarray(h, dtype=np.int64)
    i = _piece_index(kind, x)
    mul, div, off = _tables(kind)
    return (trunc_div_array(x * mul[i], div[i]) + off[i]).astype(np.int32)


def apply(kind: Activation, h: IntMatrix) -> IntMatrix:
    """Activation applied elementwise; every output lies in [-127, 127]."""
    return IntMatrix.wrap(apply_array(kind, h.data))


def slope_arrays(kind: Activation, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i = _piece_index(kind, np.asarray(h, dtype=np.int64))
    mul, div, _ = _tables(kind)
    return mul[i], div[i]


def apply_slope(delta: IntMatrix, kind: Activation, h: IntMatrix) -> IntMatrix:
    """``trunc(delta * num / den)`` with the slope taken at ``h``.

    Zero-slope entries are multiplied by zero, so saturated units pass no error.
    """
    if delta.shape != h.shape:
        raise ShapeError(f"apply_slope shape mismatch: {delta.shape} vs {h.shape}")
    num, den = slope_arrays(kind, h.data)
    prod = narrow(delta.data.astype(np.int64) * num, "apply_slope")
    return IntMatrix.wrap(narrow(trunc_div_array(prod, den), "apply_slope"))
