"""Dense 32-bit signed integer matrices.

Every element is stored as int32. Arithmetic is carried out exactly in a wider
type and then narrowed back to 32 bits under the active overflow policy:

* ``RAISE``    (default) out-of-range results raise :class:`IntOverflowError`
* ``WRAP``     two's-complement wrap-around, like a release build in C
* ``SATURATE`` clamp to [INT32_MIN, INT32_MAX] and count every clamped element

Division is always truncation toward zero.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .rng import Rng

INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1
INT8_LO = -127
INT8_HI = 127

# Largest magnitude float64 represents exactly as an integer.
_F64_EXACT = 1 << 53


class ShapeError(ValueError):
    pass


class InvalidDimensionError(ValueError):
    pass


class IntOverflowError(ArithmeticError):
    """A 32-bit result fell outside [INT32_MIN, INT32_MAX]."""

    def __init__(self, op: str, index: tuple[int, ...], value: int, context: str | None = None):
        self.op = op
        self.index = index
        self.value = value
        self.context = context
        where = f" in {context}" if context else ""
        super().__init__(f"int32 overflow in {op}{where} at {index}: {value}")


class Overflow(enum.Enum):
    RAISE = "raise"
    WRAP = "wrap"
    SATURATE = "saturate"


@dataclass
class OverflowTally:
    """Number of elements clamped while the SATURATE policy was active."""

    count: int = 0


_policy: contextvars.ContextVar[tuple[Overflow, OverflowTally | None, str | None]] = contextvars.ContextVar(
    "intdfa_overflow_policy", default=(Overflow.RAISE, None, None)
)


@contextlib.contextmanager
def overflow_policy(policy: Overflow, context: str | None = None) -> Iterator[OverflowTally]:
    """Run a block under ``policy``; yields the tally SATURATE writes into."""
    outer_policy, outer_tally, outer_context = _policy.get()
    tally = OverflowTally()
    token = _policy.set((policy, tally, context or outer_context))
    try:
        yield tally
    finally:
        _policy.reset(token)
        if outer_policy is Overflow.SATURATE and outer_tally is not None:
            outer_tally.count += tally.count


@contextlib.contextmanager
def tally_scope() -> Iterator[OverflowTally]:
    """Keep the caller's policy but collect its SATURATE counts separately."""
    with overflow_policy(current_policy()) as tally:
        yield tally


def current_policy() -> Overflow:
    return _policy.get()[0]


def narrow(values: np.ndarray, op: str) -> np.ndarray:
    """Bring exact integer results back to int32 under the active policy."""
    policy, tally, context = _policy.get()
    if values.dtype == np.int32:
        return values
    if values.dtype == object:
        lo = min(values.flat, default=0)
        hi = max(values.flat, default=0)
    else:
        lo = values.min(initial=0)
        hi = values.max(initial=0)
    if lo >= INT32_MIN and hi <= INT32_MAX:
        return values.astype(np.int32)
    if policy is Overflow.RAISE:
        bad = (values < INT32_MIN) | (values > INT32_MAX)
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise IntOverflowError(op, idx, int(values[idx]), context)
    if policy is Overflow.SATURATE:
        bad = (values < INT32_MIN) | (values > INT32_MAX)
        tally.count += int(np.count_nonzero(bad))
        return np.clip(values, INT32_MIN, INT32_MAX).astype(np.int32)
    # WRAP: keep the low 32 bits and reinterpret them as signed
    if values.dtype == object:
        low = np.asarray([int(v) & 0xFFFFFFFF for v in values.flat], dtype=np.int64).reshape(values.shape)
    else:
        low = values & 0xFFFFFFFF
    return low.astype(np.uint32).view(np.int32)


def trunc_div(a: int, b: int) -> int:
    """Integer quotient rounded toward zero: ``trunc_div(-7, 2) == -3``."""
    if b == 0:
        raise ZeroDivisionError("trunc_div by zero")
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def trunc_div_array(a: np.ndarray, b) -> np.ndarray:
    """Elementwise truncating division on int64 arrays; ``b`` may broadcast."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if np.any(b == 0):
        raise ZeroDivisionError("trunc_div by zero")
    q = np.abs(a) // np.abs(b)
    return np.where((a < 0) != (b < 0), -q, q)


class IntMatrix:
    """rows x cols matrix of int32 values, row-major."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise InvalidDimensionError(f"expected a 2-D array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidDimensionError(f"dimensions must be positive, got {arr.shape}")
        if arr.dtype == np.int32:
            self.data = arr.copy()
            return
        if arr.dtype.kind not in "iub" and arr.dtype != object:
            raise TypeError(f"integer data required, got {arr.dtype}")
        ints = np.asarray(arr.tolist(), dtype=object) if arr.dtype == object else arr.astype(np.int64)
        if ints.size and (min(ints.flat) < INT32_MIN or max(ints.flat) > INT32_MAX):
            raise IntOverflowError("construct", (), int(max(ints.flat, key=abs)))
        self.data = np.asarray(ints, dtype=np.int64).astype(np.int32)

    @classmethod
    def wrap(cls, arr: np.ndarray) -> IntMatrix:
        """Adopt an int32 2-D array without copying or validation."""
        m = cls.__new__(cls)
        m.data = arr
        return m

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def T(self) -> IntMatrix:
        return transpose(self)

    def __getitem__(self, idx) -> int:
        return int(self.data[idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None

    def __repr__(self) -> str:
        return f"IntMatrix({self.data.tolist()})" if self.data.size <= 64 else f"IntMatrix<{self.rows}x{self.cols}>"

    def tolist(self) -> list[list[int]]:
        return self.data.tolist()

    def copy(self) -> IntMatrix:
        return IntMatrix.wrap(self.data.copy())

    def __matmul__(self, other: IntMatrix) -> IntMatrix:
        return matmul(self, other)

    def __add__(self, other: IntMatrix) -> IntMatrix:
        return add(self, other)

    def __sub__(self, other: IntMatrix) -> IntMatrix:
        return sub(self, other)

    def __mul__(self, other: IntMatrix) -> IntMatrix:
        return hadamard(self, other)


def _check_dims(rows: int, cols: int) -> None:
    if rows < 1 or cols < 1:
        raise InvalidDimensionError(f"dimensions must be positive, got ({rows}, {cols})")


def zeros(rows: int, cols: int) -> IntMatrix:
    _check_dims(rows, cols)
    return IntMatrix.wrap(np.zeros((rows, cols), dtype=np.int32))


def full(rows: int, cols: int, value: int) -> IntMatrix:
    _check_dims(rows, cols)
    return IntMatrix(np.full((rows, cols), value, dtype=np.int64))


def identity(n: int) -> IntMatrix:
    _check_dims(n, n)
    return IntMatrix.wrap(np.eye(n, dtype=np.int32))


def _max_abs(a: np.ndarray) -> int:
    return int(np.abs(a.astype(np.int64)).max(initial=0))


def exact_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact integer product of two integer arrays, returned as int64 or object.

    When ``inner * max|a| * max|b|`` stays below 2**53 every partial sum is an
    integer float64 holds exactly, whatever order BLAS adds them in, so the
    fast float path gives the same answer as a sequential integer loop.
    """
    inner = a.shape[1]
    bound = inner * _max_abs(a) * _max_abs(b)
    if bound < _F64_EXACT:
        return (a.astype(np.float64) @ b.astype(np.float64)).astype(np.int64)
    if bound < 1 << 63:
        return a.astype(np.int64) @ b.astype(np.int64)
    return np.asarray(a, dtype=object) @ np.asarray(b, dtype=object)


def matmul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    """Matrix product with 32-bit accumulation.

    Only the final dot products are range-checked: with two's-complement
    accumulation a transient excursion of a partial sum cancels out whenever
    the final sum fits.
    """
    if a.cols != b.rows:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return IntMatrix.wrap(narrow(exact_matmul(a.data, b.data), "matmul"))


def transpose(a: IntMatrix) -> IntMatrix:
    return IntMatrix.wrap(np.ascontiguousarray(a.data.T))


def _same_shape(a: IntMatrix, b: IntMatrix, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} shape mismatch: {a.shape} vs {b.shape}")


def hadamard(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    _same_shape(a, b, "hadamard")
    return IntMatrix.wrap(narrow(a.data.astype(np.int64) * b.data.astype(np.int64), "hadamard"))


def _broadcast_ok(a: IntMatrix, b: IntMatrix, op: str) -> None:
    if a.shape == b.shape:
        return
    if b.rows == 1 and b.cols == a.cols:
        return
    raise ShapeError(f"{op} shape mismatch: {a.shape} vs {b.shape}")


def add(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    """Elementwise sum; a 1 x c ``b`` is broadcast across the rows of ``a``."""
    _broadcast_ok(a, b, "add")
    return IntMatrix.wrap(narrow(a.data.astype(np.int64) + b.data.astype(np.int64), "add"))


def sub(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    _broadcast_ok(a, b, "sub")
    return IntMatrix.wrap(narrow(a.data.astype(np.int64) - b.data.astype(np.int64), "sub"))


def scalar_trunc_div(a: IntMatrix, d: int) -> IntMatrix:
    if d == 0:
        raise ZeroDivisionError("scalar_trunc_div by zero")
    return IntMatrix.wrap(narrow(trunc_div_array(a.data, d), "scalar_trunc_div"))


def clamp(a: IntMatrix, lo: int, hi: int) -> IntMatrix:
    if lo > hi:
        raise ValueError(f"invalid clamp range [{lo}, {hi}]")
    return IntMatrix.wrap(np.clip(a.data, lo, hi).astype(np.int32))


def column_sum(a: IntMatrix) -> IntMatrix:
    """1 x cols row of column totals."""
    return IntMatrix.wrap(narrow(a.data.astype(np.int64).sum(axis=0, keepdims=True), "column_sum"))


def random_fill(m: IntMatrix, rng: Rng, lo: int, hi: int) -> IntMatrix:
    """Matrix of ``m``'s shape with entries uniform on [lo, hi], row-major draw order."""
    if lo > hi:
        raise ValueError(f"invalid range [{lo}, {hi}]")
    if lo < INT32_MIN or hi > INT32_MAX:
        raise ValueError("range must lie inside int32")
    vals = rng.integers(lo, hi, m.rows * m.cols)
    return IntMatrix.wrap(vals.reshape(m.shape).astype(np.int32))


def argmax_row(m: IntMatrix, row: int) -> int:
    """Column of the largest entry in ``row``; ties go to the lowest index."""
    if not 0 <= row < m.rows:
        raise IndexError(f"row {row} out of bounds for {m.rows} rows")
    return int(np.argmax(m.data[row]))


def argmax_rows(m: IntMatrix) -> np.ndarray:
    return np.argmax(m.data, axis=1)


def from_rows(rows: Sequence[Sequence[int]]) -> IntMatrix:
    return IntMatrix(np.asarray(rows, dtype=np.int64))
