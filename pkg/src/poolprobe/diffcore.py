"""Minimal reverse-mode automatic differentiation over dense 2-D matrices.

Everything is a rows x cols matrix of float64; vectors are 1 x n rows and
scalars are 1 x 1. Operations execute eagerly on numpy arrays and, when a
Tape is active, record a pullback closure. Replaying the pullbacks in
reverse order accumulates exact analytic gradients into each input's
``grad`` buffer, with additive accumulation for values used more than once.

The op set is exactly what the pooling-head model graph needs; there is no
broadcasting beyond bias rows, no views, and no higher-order derivatives.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError

LOG_FLOOR = 1e-12
STANDARDIZE_EPS = 1e-5


class Tensor:
    """A rows x cols float64 matrix with an optional gradient accumulator."""

    __slots__ = ("data", "grad")

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D matrices, got ndim={arr.ndim}")
        self.data = arr
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match value shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def grad_or_zeros(self) -> np.ndarray:
        """Accumulated gradient, or zeros when unreached by backward."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class ComputationTape:
    """Ordered record of executed ops and their pullback rules.

    Rebuilt per forward pass (define-by-run). Use as a context manager;
    ops executed inside the ``with`` block are recorded.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "ComputationTape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE.pop()

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], pullback) -> None:
        self._records.append((out, inputs, pullback))


_ACTIVE: list[ComputationTape] = []


def _record(out: Tensor, inputs: tuple[Tensor, ...], pullback) -> None:
    if _ACTIVE:
        _ACTIVE[-1].record(out, inputs, pullback)


def backward(tape: ComputationTape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(input) into every tensor reachable on the tape.

    Pullbacks replay in reverse recorded order, so each op's output gradient
    is complete before the op itself runs; repeated uses of one tensor add up.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar (1x1) loss, got {loss.shape}")
    loss.accumulate_grad(np.ones((1, 1)))
    for out, inputs, pullback in reversed(tape._records):
        if out.grad is None:
            continue
        grads = pullback(out.grad)
        for tensor, g in zip(inputs, grads):
            if g is not None:
                tensor.accumulate_grad(g)


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; pullback dA = dC @ B^T, dB = A^T @ dC."""
    if a.cols != b.rows:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)
    ad, bd = a.data, b.data

    def pullback(g):
        return g @ bd.T, ad.T @ g

    _record(out, (a, b), pullback)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add needs equal shapes: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data)

    def pullback(g):
        return g, g

    _record(out, (a, b), pullback)
    return out


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply every entry by a (non-trainable) constant."""
    f = float(factor)
    out = Tensor(x.data * f)

    def pullback(g):
        return (g * f,)

    _record(out, (x,), pullback)
    return out


def transpose(x: Tensor) -> Tensor:
    out = Tensor(x.data.T.copy())

    def pullback(g):
        return (g.T,)

    _record(out, (x,), pullback)
    return out


def add_bias_broadcast(x: Tensor, bias: Tensor) -> Tensor:
    """Add a 1 x d bias row to every row of x."""
    if bias.rows != 1 or bias.cols != x.cols:
        raise ShapeError(
            f"bias must be 1x{x.cols} to broadcast over {x.shape}, got {bias.shape}"
        )
    out = Tensor(x.data + bias.data)

    def pullback(g):
        return g, g.sum(axis=0, keepdims=True)

    _record(out, (x, bias), pullback)
    return out


def tanh_map(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y)

    def pullback(g):
        return (g * (1.0 - y * y),)

    _record(out, (x,), pullback)
    return out


def row_softmax(x: Tensor) -> Tensor:
    """Softmax along each row, computed with max subtraction for stability.

    Outputs are positive and each row sums to 1 for any finite input.
    """
    # values spanning the full float64 range saturate to -inf here; exp maps
    # that to 0, which is the correct limit, so the overflow is benign
    with np.errstate(over="ignore"):
        z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)

    def pullback(g):
        inner = (g * y).sum(axis=1, keepdims=True)
        return ((g - inner) * y,)

    _record(out, (x,), pullback)
    return out


def mean_rows(x: Tensor) -> Tensor:
    """Arithmetic mean over rows, returning a 1 x cols row."""
    n = x.rows
    out = Tensor(x.data.mean(axis=0, keepdims=True))

    def pullback(g):
        return (np.repeat(g / n, n, axis=0),)

    _record(out, (x,), pullback)
    return out


def concat_cols(parts: list[Tensor]) -> Tensor:
    """Horizontal concatenation of equal-row-count tensors."""
    if not parts:
        raise ShapeError("concat_cols needs at least one input")
    rows = parts[0].rows
    for p in parts:
        if p.rows != rows:
            raise ShapeError(
                f"concat_cols row counts differ: {[p.shape for p in parts]}"
            )
    out = Tensor(np.hstack([p.data for p in parts]))
    widths = [p.cols for p in parts]
    splits = np.cumsum(widths)[:-1]

    def pullback(g):
        return tuple(np.split(g, splits, axis=1))

    _record(out, tuple(parts), pullback)
    return out


def standardize_rows(x: Tensor, eps: float = STANDARDIZE_EPS) -> Tensor:
    """Shift/scale each row to zero mean and unit variance.

    Uses population variance with ``eps`` inside the square root, so a
    constant row maps to a zero row instead of dividing by zero. No
    learnable affine follows.
    """
    m = x.data.mean(axis=1, keepdims=True)
    centered = x.data - m
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    y = centered * inv_std
    out = Tensor(y)

    def pullback(g):
        g_mean = g.mean(axis=1, keepdims=True)
        gy_mean = (g * y).mean(axis=1, keepdims=True)
        return ((g - g_mean - y * gy_mean) * inv_std,)

    _record(out, (x,), pullback)
    return out


def dropout_mask(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout: zero entries with probability ``rate`` and scale
    survivors by 1/(1-rate) in training mode; identity in evaluation mode.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("training-mode dropout needs an rng")
    keep = rng.random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    out = Tensor(x.data * mask)

    def pullback(g):
        return (g * mask,)

    _record(out, (x,), pullback)
    return out


def sum_all(x: Tensor) -> Tensor:
    """Sum of all entries as a 1 x 1 tensor."""
    out = Tensor(np.array([[x.data.sum()]]))
    shape = x.shape

    def pullback(g):
        return (np.full(shape, g[0, 0]),)

    _record(out, (x,), pullback)
    return out


def neg_log_pick(p: Tensor, col: int) -> Tensor:
    """-log of one entry of a 1 x n row, clamped at LOG_FLOOR inside the log.

    Entries at or below the floor sit in the clamped region and get zero
    gradient.
    """
    if p.rows != 1:
        raise ShapeError(f"neg_log_pick needs a 1xn row, got {p.shape}")
    if not 0 <= col < p.cols:
        raise IndexError(f"column {col} outside [0, {p.cols})")
    value = p.data[0, col]
    out = Tensor(np.array([[-np.log(max(value, LOG_FLOOR))]]))

    def pullback(g):
        gp = np.zeros_like(p.data)
        if value > LOG_FLOOR:
            gp[0, col] = -g[0, 0] / value
        return (gp,)

    _record(out, (p,), pullback)
    return out
