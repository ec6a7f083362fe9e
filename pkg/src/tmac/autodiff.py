"""Minimal dense 2-D tensor with reverse-mode autodiff on an explicit tape.

Everything in this package trains through this module: matmul, a small set
of elementwise ops, reductions, and column concatenation. Arrays are 64-bit
floats throughout; gradients live on the tape, not on the tensors, so many
tapes can run against shared read-only parameters.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not compose for the requested op."""


class NumericError(ArithmeticError):
    """An op produced a non-finite value."""


class Tensor:
    """Immutable 2-D float64 array, optionally marked as a gradient target."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("tensor holds non-finite entries")
        self.data = arr
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64).reshape(1, -1) if np.ndim(x) else [[float(x)]])


def _reduce_to(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum a full-shape gradient back down to a broadcast operand's shape."""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and grad.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


def _broadcast_shape(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    """Numpy-style broadcast limited to row/column/scalar vectors."""
    rows_ok = a[0] == b[0] or a[0] == 1 or b[0] == 1
    cols_ok = a[1] == b[1] or a[1] == 1 or b[1] == 1
    if not (rows_ok and cols_ok):
        raise ShapeError(f"shapes {a} and {b} do not broadcast")
    return (max(a[0], b[0]), max(a[1], b[1]))


_AXIS = {"rows": 1, "cols": 0, "all": None}


class Tape:
    """Ordered record of ops for one forward pass; single-owner.

    Nodes are appended in creation order, which is already a topological
    order under define-by-run. backward() walks them in reverse and leaves
    per-tensor gradients in the tape's gradient slots.
    """

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], callable]] = []
        self._grads: dict[int, np.ndarray] = {}

    def _record(self, out: Tensor, parents: tuple[Tensor, ...], backward) -> Tensor:
        self._nodes.append((out, parents, backward))
        return out

    def _acc(self, t: Tensor, g: np.ndarray) -> None:
        key = id(t)
        if key in self._grads:
            self._grads[key] += g
        else:
            self._grads[key] = g.copy()

    # ---- ops -------------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.cols != b.rows:
            raise ShapeError(f"matmul shapes {a.shape} x {b.shape}")
        with np.errstate(over="ignore", invalid="ignore"):
            out_data = a.data @ b.data
        if not np.isfinite(out_data).all():
            raise NumericError("matmul produced non-finite values")
        out = Tensor(out_data)

        def backward(g):
            self._acc(a, g @ b.data.T)
            self._acc(b, a.data.T @ g)

        return self._record(out, (a, b), backward)

    def add(self, a: Tensor, b) -> Tensor:
        b = _as_tensor(b)
        _broadcast_shape(a.shape, b.shape)
        out_data = a.data + b.data
        if not np.isfinite(out_data).all():
            raise NumericError("add produced non-finite values")
        out = Tensor(out_data)

        def backward(g):
            self._acc(a, _reduce_to(g, a.shape))
            self._acc(b, _reduce_to(g, b.shape))

        return self._record(out, (a, b), backward)

    def mul(self, a: Tensor, b) -> Tensor:
        b = _as_tensor(b)
        _broadcast_shape(a.shape, b.shape)
        out_data = a.data * b.data
        if not np.isfinite(out_data).all():
            raise NumericError("mul produced non-finite values")
        out = Tensor(out_data)

        def backward(g):
            self._acc(a, _reduce_to(g * b.data, a.shape))
            self._acc(b, _reduce_to(g * a.data, b.shape))

        return self._record(out, (a, b), backward)

    def exp(self, a: Tensor) -> Tensor:
        with np.errstate(over="ignore"):
            out_data = np.exp(a.data)
        if not np.isfinite(out_data).all():
            raise NumericError("exp produced non-finite values")
        out = Tensor(out_data)

        def backward(g):
            self._acc(a, g * out.data)

        return self._record(out, (a,), backward)

    def log(self, a: Tensor) -> Tensor:
        if (a.data <= 0).any():
            raise NumericError("log operand not strictly positive")
        out = Tensor(np.log(a.data))

        def backward(g):
            self._acc(a, g / a.data)

        return self._record(out, (a,), backward)

    def sigmoid(self, a: Tensor) -> Tensor:
        # split by sign for stability at large |x|
        x = a.data
        out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                            np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        out = Tensor(out_data)

        def backward(g):
            self._acc(a, g * out.data * (1.0 - out.data))

        return self._record(out, (a,), backward)

    def relu(self, a: Tensor) -> Tensor:
        out = Tensor(np.maximum(a.data, 0.0))

        def backward(g):
            self._acc(a, g * (a.data > 0))

        return self._record(out, (a,), backward)

    def leaky_relu(self, a: Tensor, slope: float = 0.2) -> Tensor:
        out = Tensor(np.where(a.data > 0, a.data, slope * a.data))

        def backward(g):
            self._acc(a, g * np.where(a.data > 0, 1.0, slope))

        return self._record(out, (a,), backward)

    def pow(self, a: Tensor, k: float) -> Tensor:
        out_data = a.data ** k
        if not np.isfinite(out_data).all():
            raise NumericError(f"pow(k={k}) produced non-finite values")
        out = Tensor(out_data)

        def backward(g):
            if k == 0:
                return
            grad = g * k * a.data ** (k - 1)
            if not np.isfinite(grad).all():
                raise NumericError(f"pow(k={k}) gradient non-finite")
            self._acc(a, grad)

        return self._record(out, (a,), backward)

    def clamp(self, a: Tensor, lo: float, hi: float) -> Tensor:
        out = Tensor(np.clip(a.data, lo, hi))

        def backward(g):
            self._acc(a, g * ((a.data >= lo) & (a.data <= hi)))

        return self._record(out, (a,), backward)

    def sum(self, a: Tensor, axis: str = "all") -> Tensor:
        ax = _AXIS[axis]
        out = Tensor(a.data.sum(axis=ax, keepdims=True) if ax is not None
                     else a.data.sum().reshape(1, 1))

        def backward(g):
            self._acc(a, np.broadcast_to(g, a.shape).copy())

        return self._record(out, (a,), backward)

    def mean(self, a: Tensor, axis: str = "all") -> Tensor:
        if a.data.size == 0:
            raise ShapeError("mean of empty tensor")
        ax = _AXIS[axis]
        out = Tensor(a.data.mean(axis=ax, keepdims=True) if ax is not None
                     else a.data.mean().reshape(1, 1))
        count = a.data.size if ax is None else a.shape[ax]

        def backward(g):
            self._acc(a, np.broadcast_to(g / count, a.shape).copy())

        return self._record(out, (a,), backward)

    def max(self, a: Tensor, axis: str = "all") -> Tensor:
        if a.data.size == 0:
            raise ShapeError("max of empty tensor")
        ax = _AXIS[axis]
        if ax is None:
            out_data = a.data.max().reshape(1, 1)
        else:
            out_data = a.data.max(axis=ax, keepdims=True)
        out = Tensor(out_data)

        def backward(g):
            # route to the first maximal entry of each reduced slice
            if ax is None:
                mask = np.zeros_like(a.data)
                idx = np.unravel_index(np.argmax(a.data), a.shape)
                mask[idx] = 1.0
            else:
                mask = np.zeros_like(a.data)
                idx = np.argmax(a.data, axis=ax)
                if ax == 1:
                    mask[np.arange(a.rows), idx] = 1.0
                else:
                    mask[idx, np.arange(a.cols)] = 1.0
            self._acc(a, np.broadcast_to(g, a.shape) * mask)

        return self._record(out, (a,), backward)

    def transpose(self, a: Tensor) -> Tensor:
        out = Tensor(a.data.T)

        def backward(g):
            self._acc(a, g.T)

        return self._record(out, (a,), backward)

    def hconcat(self, a: Tensor, b: Tensor) -> Tensor:
        if a.rows != b.rows:
            raise ShapeError(f"hconcat row mismatch {a.shape} vs {b.shape}")
        out = Tensor(np.concatenate([a.data, b.data], axis=1))

        def backward(g):
            self._acc(a, g[:, : a.cols])
            self._acc(b, g[:, a.cols:])

        return self._record(out, (a, b), backward)

    # ---- backward --------------------------------------------------------

    def backward(self, loss: Tensor) -> None:
        if loss.shape != (1, 1):
            raise ShapeError(f"backward needs a scalar loss, got {loss.shape}")
        self._grads.clear()
        self._grads[id(loss)] = np.ones((1, 1))
        for out, _parents, back in reversed(self._nodes):
            g = self._grads.get(id(out))
            if g is not None:
                back(g)

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient of the last backward() loss w.r.t. t; zeros if unreached."""
        g = self._grads.get(id(t))
        if g is None:
            return np.zeros(t.shape)
        return g
