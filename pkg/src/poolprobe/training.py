"""Loss, AdamW, cosine-warmup schedule, and the k-fold training driver.

Training follows a fixed protocol: 30 epochs, batches of 16 drawn as
seeded shuffles re-drawn each epoch, gradients averaged over the batch,
AdamW with decoupled weight decay, and a learning rate that ramps linearly
to its peak over the first 10% of steps then decays to zero on a cosine.
The final-epoch model is evaluated on the held-out fold with dropout off;
no best-epoch selection. Each fold re-initializes the model from a
fold-derived seed, so a whole cross-validation run is a pure function of
(manifest, features, configs, seed).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .diffcore import ComputationTape, Tensor
from .errors import ConfigError, DataError, ShapeError
from .featurestore import DatasetManifest, FeatureSource, UtteranceRecord
from .metrics import AggregateReport, ConfusionMatrix, FoldReport, aggregate_reports, fold_report
from .model import HeadModel, ModelConfig, forward


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    peak_lr: float = 1e-4
    warmup_fraction: float = 0.10
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    folds: int | None = None  # None: take the fold count from the manifest

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.peak_lr <= 0:
            raise ConfigError(f"peak learning rate must be positive, got {self.peak_lr}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError(
                f"warmup fraction must lie in [0, 1), got {self.warmup_fraction}"
            )
        if self.weight_decay < 0:
            raise ConfigError(f"weight decay must be non-negative, got {self.weight_decay}")


def cross_entropy(probs: Tensor, label: int) -> Tensor:
    """-log(probs[label]) with a 1e-12 floor inside the log."""
    if not 0 <= label < probs.cols:
        raise IndexError(f"label {label} outside [0, {probs.cols})")
    return dc.neg_log_pick(probs, label)


def cosine_lr(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear 0 -> peak ramp over the warmup steps, then cosine decay to 0.

    warmup_steps = round(warmup_fraction * total_steps). Continuous at the
    warmup boundary and non-increasing after it.
    """
    if total_steps <= 0:
        raise ConfigError(f"total_steps must be positive, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ConfigError(f"step {step} outside [0, {total_steps}]")
    warmup_steps = round(cfg.warmup_fraction * total_steps)
    if step < warmup_steps:
        return cfg.peak_lr * step / warmup_steps
    span = total_steps - warmup_steps
    if span == 0:
        return 0.0
    return cfg.peak_lr * 0.5 * (1.0 + math.cos(math.pi * (step - warmup_steps) / span))


class OptimizerState:
    """Per-parameter first/second moment accumulators and a step counter."""

    def __init__(self):
        self.step = 0
        self.first_moment: dict[str, np.ndarray] = {}
        self.second_moment: dict[str, np.ndarray] = {}


def adamw_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    cfg: TrainConfig,
) -> None:
    """One decoupled-weight-decay Adam update with bias-corrected moments.

    Decay multiplies weights by (1 - lr * weight_decay) before the moment
    update is subtracted, so a zero-gradient step with decay scales weights
    by exactly that factor. Moments update even when lr is 0.
    """
    if lr < 0:
        raise ConfigError(f"learning rate must be non-negative, got {lr}")
    state.step += 1
    t = state.step
    bias1 = 1.0 - cfg.beta1**t
    bias2 = 1.0 - cfg.beta2**t
    for name, param in params.items():
        g = grads[name]
        if g.shape != param.data.shape:
            raise ShapeError(
                f"gradient for {name} has shape {g.shape}, expected {param.data.shape}"
            )
        m = state.first_moment.get(name)
        if m is None:
            m = state.first_moment[name] = np.zeros_like(param.data)
            state.second_moment[name] = np.zeros_like(param.data)
        v = state.second_moment[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        param.data *= 1.0 - lr * cfg.weight_decay
        param.data -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    accuracy: float


def _fold_seed_sequences(train_cfg: TrainConfig, fold_id: int):
    root = np.random.SeedSequence([train_cfg.seed, fold_id])
    init_ss, shuffle_ss, dropout_ss = root.spawn(3)
    return init_ss, shuffle_ss, dropout_ss


def predict(model: HeadModel, matrix: np.ndarray) -> int:
    """Evaluation-mode class prediction for one utterance."""
    probs = forward(Tensor(matrix), model, training=False)
    return int(np.argmax(probs.data[0]))


def evaluate(
    model: HeadModel,
    records: list[UtteranceRecord],
    features: FeatureSource,
    manifest: DatasetManifest,
) -> ConfusionMatrix:
    """Dropout-off predictions over ``records`` as a confusion matrix."""
    layer = model.config.encoder_layer
    true_labels = []
    predicted = []
    for rec in records:
        true_labels.append(rec.label)
        predicted.append(predict(model, features.matrix(rec, layer)))
    return ConfusionMatrix.from_pairs(true_labels, predicted, manifest.class_names)


def train_fold(
    manifest: DatasetManifest,
    features: FeatureSource,
    fold_id: int,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
) -> tuple[HeadModel, list[EpochStats]]:
    """Train on every record outside ``fold_id`` and return the final model.

    Batches are seeded shuffles re-drawn each epoch; the batch gradient is
    the mean over batch losses, and the incomplete final batch is kept.
    """
    if not 0 <= fold_id < manifest.fold_count:
        raise ConfigError(f"fold {fold_id} outside [0, {manifest.fold_count})")
    train_records = manifest.records_outside_fold(fold_id)
    if not train_records:
        raise DataError(f"fold {fold_id}: training split is empty")

    init_ss, shuffle_ss, dropout_ss = _fold_seed_sequences(train_cfg, fold_id)
    model = HeadModel.initialize(model_cfg, np.random.default_rng(init_ss))
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rng = np.random.default_rng(dropout_ss)

    layer = model_cfg.encoder_layer
    params = model.named_parameters()
    state = OptimizerState()
    n = len(train_records)
    batches_per_epoch = math.ceil(n / train_cfg.batch_size)
    total_steps = train_cfg.epochs * batches_per_epoch

    history: list[EpochStats] = []
    step = 0
    for epoch in range(train_cfg.epochs):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, train_cfg.batch_size):
            batch = [train_records[i] for i in order[start : start + train_cfg.batch_size]]
            model.zero_grad()
            with ComputationTape() as tape:
                total = None
                for rec in batch:
                    probs = forward(
                        Tensor(features.matrix(rec, layer)),
                        model,
                        training=True,
                        rng=dropout_rng,
                    )
                    if int(np.argmax(probs.data[0])) == rec.label:
                        correct += 1
                    loss = cross_entropy(probs, rec.label)
                    total = loss if total is None else dc.add(total, loss)
                batch_loss = dc.scale(total, 1.0 / len(batch))
            dc.backward(tape, batch_loss)
            loss_sum += batch_loss.item() * len(batch)
            grads = {name: t.grad_or_zeros() for name, t in params.items()}
            lr = cosine_lr(step, total_steps, train_cfg)
            adamw_step(params, grads, state, lr, train_cfg)
            step += 1
        history.append(EpochStats(epoch, loss_sum / n, correct / n))
    return model, history


def run_fold(
    manifest: DatasetManifest,
    features: FeatureSource,
    fold_id: int,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
) -> tuple[FoldReport, list[EpochStats]]:
    """train_fold plus held-out evaluation, as a FoldReport."""
    model, history = train_fold(manifest, features, fold_id, model_cfg, train_cfg)
    held_out = manifest.records_in_fold(fold_id)
    if not held_out:
        raise DataError(f"fold {fold_id}: held-out split is empty")
    cm = evaluate(model, held_out, features, manifest)
    return fold_report(fold_id, cm), history


def _run_fold_worker(args):
    manifest, features, fold_id, model_cfg, train_cfg = args
    report, _ = run_fold(manifest, features, fold_id, model_cfg, train_cfg)
    return report


def cross_validate(
    manifest: DatasetManifest,
    features: FeatureSource,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    jobs: int = 1,
) -> tuple[list[FoldReport], AggregateReport]:
    """One train/evaluate cycle per fold plus a mean +/- std aggregate.

    Folds are independent; ``jobs`` > 1 runs them in worker processes with
    results identical to serial execution.
    """
    k = manifest.fold_count
    if train_cfg.folds is not None and train_cfg.folds != k:
        raise ConfigError(
            f"configured fold count {train_cfg.folds} does not match "
            f"manifest fold count {k}"
        )
    if k < 2:
        raise ConfigError(f"cross-validation needs k >= 2 folds, got {k}")
    if jobs > 1:
        work = [(manifest, features, f, model_cfg, train_cfg) for f in range(k)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_fold_worker, work))
    else:
        reports = [
            run_fold(manifest, features, f, model_cfg, train_cfg)[0] for f in range(k)
        ]
    return reports, aggregate_reports(reports)
