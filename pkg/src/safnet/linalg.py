"""Dense 2-D float64 matrices and the handful of operations the model needs."""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Matrix:
    """Immutable row-major 2-D array of 64-bit floats.

    Thin wrapper over a C-contiguous numpy array; the wrapped buffer is
    marked read-only so instances can be shared freely across threads.
    """

    __slots__ = ("_a",)

    def __init__(self, values) -> None:
        a = np.array(values, dtype=np.float64, order="C", copy=True)
        if a.ndim != 2:
            raise ShapeError(f"Matrix needs a 2-D array, got ndim={a.ndim}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ShapeError(f"Matrix dimensions must be positive, got {a.shape}")
        a.flags.writeable = False
        self._a = a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def data(self) -> np.ndarray:
        """The underlying (read-only) rows x cols array."""
        return self._a

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls(np.zeros((rows, cols)))

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls(np.eye(n))

    def tolist(self) -> list[list[float]]:
        return self._a.tolist()

    def __getstate__(self):
        return self._a

    def __setstate__(self, state):
        a = np.ascontiguousarray(state, dtype=np.float64)
        a.flags.writeable = False
        self._a = a

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols})"


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product a @ b."""
    if a.cols != b.rows:
        raise ShapeError(f"matmul: {a.rows}x{a.cols} @ {b.rows}x{b.cols} (inner dims differ)")
    return Matrix(a.data @ b.data)


def transpose(m: Matrix) -> Matrix:
    return Matrix(m.data.T)


def relu(m: Matrix) -> Matrix:
    """Elementwise max(0, x)."""
    return Matrix(np.maximum(m.data, 0.0))


def row_softmax(m: Matrix) -> Matrix:
    """Softmax applied to each row independently.

    The per-row maximum is subtracted before exponentiation so large
    logits cannot overflow; the result is mathematically unchanged.
    """
    shifted = m.data - m.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return Matrix(e / e.sum(axis=1, keepdims=True))


def glorot_uniform(rows: int, cols: int, rng: np.random.Generator) -> Matrix:
    """Uniform draw from +/- sqrt(6 / (rows + cols)), one value per entry.

    Deterministic for a given generator state and draw order.
    """
    bound = np.sqrt(6.0 / (rows + cols))
    return Matrix(rng.uniform(-bound, bound, size=(rows, cols)))
