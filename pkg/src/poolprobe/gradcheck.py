"""Finite-difference verification of the full model's analytic gradients.

The check perturbs every parameter entry by +-h, re-runs the forward pass,
and compares the central difference against the tape's gradient. Relative
error is measured elementwise over max(1, |analytic|). Dropout stays
active in training mode but is re-seeded identically per evaluation, so the
loss is a deterministic function of the parameters.
"""

from __future__ import annotations

import numpy as np

from . import diffcore as dc
from .diffcore import ComputationTape, Tensor
from .model import HeadModel, ModelConfig, forward
from .training import cross_entropy

DEFAULT_STEP = 1e-6
DEFAULT_TOLERANCE = 1e-4
_DROPOUT_SEED = 1234


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom))


def finite_difference(loss_fn, tensor: Tensor, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference d(loss)/d(tensor), one entry at a time."""
    grad = np.zeros_like(tensor.data)
    it = np.nditer(tensor.data, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        original = tensor.data[idx]
        tensor.data[idx] = original + h
        up = loss_fn()
        tensor.data[idx] = original - h
        down = loss_fn()
        tensor.data[idx] = original
        grad[idx] = (up - down) / (2.0 * h)
        it.iternext()
    return grad


def model_gradcheck(
    method: str,
    d_enc: int = 10,
    d_model: int = 8,
    frames: int = 7,
    num_heads: int = 2,
    d_hidden: int = 3,
    num_classes: int = 4,
    h: float = DEFAULT_STEP,
    seed: int = 0,
) -> dict[str, float]:
    """Max relative FD error per parameter tensor for one pooling method."""
    cfg = ModelConfig(
        d_enc=d_enc,
        num_classes=num_classes,
        pooling_method=method,
        d_model=d_model,
        num_heads=num_heads,
        d_hidden=d_hidden,
    )
    rng = np.random.default_rng(seed)
    model = HeadModel.initialize(cfg, rng)
    h_enc = rng.normal(size=(frames, d_enc))
    label = int(rng.integers(num_classes))

    def loss_value() -> float:
        probs = forward(
            Tensor(h_enc), model, training=True, rng=np.random.default_rng(_DROPOUT_SEED)
        )
        return cross_entropy(probs, label).item()

    model.zero_grad()
    with ComputationTape() as tape:
        probs = forward(
            Tensor(h_enc), model, training=True, rng=np.random.default_rng(_DROPOUT_SEED)
        )
        loss = cross_entropy(probs, label)
    dc.backward(tape, loss)

    errors: dict[str, float] = {}
    for name, tensor in model.named_parameters().items():
        numeric = finite_difference(loss_value, tensor, h=h)
        errors[name] = max_relative_error(tensor.grad_or_zeros(), numeric)
    return errors
