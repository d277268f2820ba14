from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]


class ShapeError(ValueError):
    pass


def as_vector(v: object) -> Vector:
    out = np.asarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {out.shape}")
    return out


def as_matrix(m: object) -> Matrix:
    out = np.asarray(m, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {out.shape}")
    return out


def matvec(m: Matrix, v: Vector) -> Vector:
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ShapeError(f"matvec: {m.shape} x {v.shape}")
    return m @ v


def softmax(v: Vector) -> Vector:
    """Max-shifted softmax. Entries equal to -inf get exactly zero mass."""
    v = as_vector(v)
    if v.size == 0:
        raise ShapeError("softmax of an empty vector")
    e = np.exp(v - np.max(v))
    return e / np.sum(e)


def log_softmax(v: Vector) -> Vector:
    v = as_vector(v)
    if v.size == 0:
        raise ShapeError("log_softmax of an empty vector")
    shifted = v - np.max(v)
    return shifted - np.log(np.sum(np.exp(shifted)))


def logsumexp(v: Vector) -> float:
    v = as_vector(v)
    if v.size == 0:
        raise ShapeError("logsumexp of an empty vector")
    top = float(np.max(v))
    return top + float(np.log(np.sum(np.exp(v - top))))


def sigmoid(v: Vector) -> Vector:
    # two-branch form keeps exp() from overflowing for large |v|
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


@dataclass(frozen=True)
class RecurrentCellParams:
    """LSTM cell weights. Gate blocks are stacked (input, forget, cell, output)."""

    w_input: Matrix
    w_recurrent: Matrix
    bias: Vector

    def __post_init__(self) -> None:
        four_h = self.w_input.shape[0]
        if self.w_input.ndim != 2 or four_h % 4 != 0 or four_h == 0:
            raise ShapeError(f"input weights must be (4*hidden, input), got {self.w_input.shape}")
        h = four_h // 4
        if self.w_recurrent.shape != (four_h, h):
            raise ShapeError(
                f"recurrent weights must be ({four_h}, {h}), got {self.w_recurrent.shape}"
            )
        if self.bias.shape != (four_h,):
            raise ShapeError(f"bias must be ({four_h},), got {self.bias.shape}")

    @property
    def hidden_size(self) -> int:
        return self.w_input.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.w_input.shape[1]

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "RecurrentCellParams":
        return cls(
            w_input=np.zeros((4 * hidden_size, input_size)),
            w_recurrent=np.zeros((4 * hidden_size, hidden_size)),
            bias=np.zeros(4 * hidden_size),
        )


def lstm_cell_step(
    p: RecurrentCellParams, x: Vector, h_prev: Vector, c_prev: Vector
) -> tuple[Vector, Vector]:
    h = p.hidden_size
    if x.shape != (p.input_size,):
        raise ShapeError(f"lstm input must be ({p.input_size},), got {x.shape}")
    if h_prev.shape != (h,) or c_prev.shape != (h,):
        raise ShapeError(f"lstm state must be ({h},), got {h_prev.shape}/{c_prev.shape}")
    z = p.w_input @ x + p.w_recurrent @ h_prev + p.bias
    i = sigmoid(z[:h])
    f = sigmoid(z[h : 2 * h])
    g = np.tanh(z[2 * h : 3 * h])
    o = sigmoid(z[3 * h :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def finite_diff_grad(f: Callable[[Vector], float], x: Vector, eps: float = 1e-6) -> Vector:
    """Central differences, one coordinate at a time."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        orig = x.flat[i]
        x.flat[i] = orig + eps
        up = f(x)
        x.flat[i] = orig - eps
        down = f(x)
        x.flat[i] = orig
        grad.flat[i] = (up - down) / (2.0 * eps)
    return grad
