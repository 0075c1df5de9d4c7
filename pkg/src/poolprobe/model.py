"""The trainable head: projector, pooling, and classifier.

One utterance flows through

    H = standardize_rows(H_enc @ projector)        # T x d_model
    a = pool(H)                                    # 1 x d_model
    probs = row_softmax(a @ classifier)            # 1 x num_classes

with ``pool`` being one of three methods:

* ``mean`` — plain average over frames (the baseline).
* ``attentive`` — per head, a tiny scorer (tanh hidden layer, dropout,
  scalar output plus trainable offset) produces one score per frame; the
  softmax of the scores weights a per-head value projection of H. Head
  outputs are concatenated and mapped back to d_model.
* ``qkv`` — per head, scaled dot-product attention with a single query
  derived from the mean-pooled representation; keys/values are per-head
  projections of H. Head outputs are concatenated and mapped back to
  d_model, mirroring the attentive merge.

Projector and classifier are bias-free. Scores and weights are computed
per frame, so every pooling method is invariant to frame order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .diffcore import Tensor
from .errors import ConfigError, ShapeError
from .featurestore import read_features, write_features

POOLING_METHODS = ("mean", "attentive", "qkv")

CHECKPOINT_CONFIG = "config.json"


@dataclass(frozen=True)
class ModelConfig:
    d_enc: int
    num_classes: int
    pooling_method: str = "mean"
    d_model: int = 256
    num_heads: int = 6
    d_hidden: int = 4
    dropout_rate: float = 0.1
    encoder_layer: int = 0

    def __post_init__(self):
        if self.pooling_method not in POOLING_METHODS:
            raise ConfigError(
                f"unknown pooling method {self.pooling_method!r}, "
                f"expected one of {POOLING_METHODS}"
            )
        if self.d_enc < 1 or self.d_model < 1:
            raise ConfigError("d_enc and d_model must be positive")
        if self.num_heads < 1:
            raise ConfigError(f"num_heads must be >= 1, got {self.num_heads}")
        if self.d_hidden < 1:
            raise ConfigError(f"d_hidden must be >= 1, got {self.d_hidden}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")


@dataclass
class AttentiveHead:
    score_hidden: Tensor  # d_model x d_hidden
    score_bias: Tensor    # 1 x d_hidden
    score_out: Tensor     # d_hidden x 1
    score_offset: Tensor  # 1 x 1, trainable scalar added to every score
    value: Tensor         # d_model x d_hidden


@dataclass
class QkvHead:
    query: Tensor  # d_model x d_hidden
    key: Tensor    # d_model x d_hidden
    value: Tensor  # d_model x d_hidden


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    limit = math.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-limit, limit, size=(rows, cols)))


@dataclass
class HeadModel:
    """Trainable parameters for one configured pooling method.

    Only the configured method's parameters are allocated: ``heads`` and
    ``merge`` stay empty/None for mean pooling.
    """

    config: ModelConfig
    projector: Tensor
    classifier: Tensor
    heads: list = field(default_factory=list)
    merge: Tensor | None = None

    @classmethod
    def initialize(cls, config: ModelConfig, seed) -> "HeadModel":
        """Build a model with Glorot-uniform matrices and zero scalars/biases.

        ``seed`` may be an int, SeedSequence, or Generator.
        """
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        projector = _glorot(rng, config.d_enc, config.d_model)
        heads: list = []
        merge = None
        if config.pooling_method == "attentive":
            for _ in range(config.num_heads):
                heads.append(
                    AttentiveHead(
                        score_hidden=_glorot(rng, config.d_model, config.d_hidden),
                        score_bias=Tensor(np.zeros((1, config.d_hidden))),
                        score_out=_glorot(rng, config.d_hidden, 1),
                        score_offset=Tensor(np.zeros((1, 1))),
                        value=_glorot(rng, config.d_model, config.d_hidden),
                    )
                )
        elif config.pooling_method == "qkv":
            for _ in range(config.num_heads):
                heads.append(
                    QkvHead(
                        query=_glorot(rng, config.d_model, config.d_hidden),
                        key=_glorot(rng, config.d_model, config.d_hidden),
                        value=_glorot(rng, config.d_model, config.d_hidden),
                    )
                )
        if config.pooling_method in ("attentive", "qkv"):
            merge = _glorot(rng, config.num_heads * config.d_hidden, config.d_model)
        classifier = _glorot(rng, config.d_model, config.num_classes)
        return cls(config, projector, classifier, heads, merge)

    def named_parameters(self) -> dict[str, Tensor]:
        """All trainable tensors in a stable order."""
        params: dict[str, Tensor] = {"projector": self.projector}
        for i, head in enumerate(self.heads):
            if isinstance(head, AttentiveHead):
                params[f"heads.{i}.score_hidden"] = head.score_hidden
                params[f"heads.{i}.score_bias"] = head.score_bias
                params[f"heads.{i}.score_out"] = head.score_out
                params[f"heads.{i}.score_offset"] = head.score_offset
                params[f"heads.{i}.value"] = head.value
            else:
                params[f"heads.{i}.query"] = head.query
                params[f"heads.{i}.key"] = head.key
                params[f"heads.{i}.value"] = head.value
        if self.merge is not None:
            params["merge"] = self.merge
        params["classifier"] = self.classifier
        return params

    def zero_grad(self) -> None:
        for t in self.named_parameters().values():
            t.grad = None


def project(h_enc: Tensor, model: HeadModel) -> Tensor:
    """Bias-free linear map to d_model followed by per-frame standardization."""
    if h_enc.cols != model.config.d_enc:
        raise ShapeError(
            f"input width {h_enc.cols} does not match configured d_enc "
            f"{model.config.d_enc}"
        )
    return dc.standardize_rows(dc.matmul(h_enc, model.projector))


def mean_pool(h: Tensor) -> Tensor:
    return dc.mean_rows(h)


def attentive_pool(
    h: Tensor,
    model: HeadModel,
    training: bool = False,
    rng: np.random.Generator | None = None,
    details: dict | None = None,
) -> Tensor:
    """Multi-head attentive average pooling.

    Per head: score each frame with tanh(h_t @ score_hidden + score_bias)
    @ score_out + score_offset (dropout on the tanh activations, training
    only), softmax the T scores into weights, and average that head's value
    projection of H under those weights. Heads are concatenated and merged
    back to d_model.
    """
    rate = model.config.dropout_rate
    head_outputs = []
    for head in model.heads:
        hidden = dc.tanh_map(dc.add_bias_broadcast(dc.matmul(h, head.score_hidden), head.score_bias))
        hidden = dc.dropout_mask(hidden, rate, rng, training)
        scores = dc.add_bias_broadcast(dc.matmul(hidden, head.score_out), head.score_offset)
        weights = dc.row_softmax(dc.transpose(scores))
        values = dc.matmul(h, head.value)
        head_outputs.append(dc.matmul(weights, values))
        if details is not None:
            details.setdefault("head_weights", []).append(weights.data.copy())
    return dc.matmul(dc.concat_cols(head_outputs), model.merge)


def qkv_pool(h: Tensor, model: HeadModel, details: dict | None = None) -> Tensor:
    """Multi-head scaled dot-product pooling with a mean-derived query.

    The single query per head comes from the global average of H, so there
    is one attention row and the result is a weighted frame average.
    """
    mu = dc.mean_rows(h)
    inv_scale = 1.0 / math.sqrt(model.config.d_hidden)
    head_outputs = []
    for head in model.heads:
        q = dc.matmul(mu, head.query)
        k = dc.matmul(h, head.key)
        v = dc.matmul(h, head.value)
        weights = dc.row_softmax(dc.scale(dc.matmul(q, dc.transpose(k)), inv_scale))
        head_outputs.append(dc.matmul(weights, v))
        if details is not None:
            details.setdefault("head_weights", []).append(weights.data.copy())
    return dc.matmul(dc.concat_cols(head_outputs), model.merge)


def classify(a: Tensor, model: HeadModel) -> Tensor:
    """Bias-free logits followed by softmax over classes."""
    if a.cols != model.config.d_model:
        raise ShapeError(
            f"pooled width {a.cols} does not match d_model {model.config.d_model}"
        )
    return dc.row_softmax(dc.matmul(a, model.classifier))


def pool(
    h: Tensor,
    model: HeadModel,
    training: bool = False,
    rng: np.random.Generator | None = None,
    details: dict | None = None,
) -> Tensor:
    method = model.config.pooling_method
    if method == "mean":
        return mean_pool(h)
    if method == "attentive":
        return attentive_pool(h, model, training=training, rng=rng, details=details)
    return qkv_pool(h, model, details=details)


def forward(
    h_enc,
    model: HeadModel,
    training: bool = False,
    rng: np.random.Generator | None = None,
    details: dict | None = None,
) -> Tensor:
    """classify(pool(project(h_enc))) as a probability row over classes."""
    if not isinstance(h_enc, Tensor):
        h_enc = Tensor(h_enc)
    h = project(h_enc, model)
    a = pool(h, model, training=training, rng=rng, details=details)
    return classify(a, model)


def count_trainable_params(model: HeadModel) -> int:
    """Exact number of scalar parameters allocated for the configured method."""
    return sum(t.data.size for t in model.named_parameters().values())


# ---------------------------------------------------------------------------
# checkpoints: one FEA1 file per parameter matrix plus a JSON config manifest.
# FEA1 stores float32, so saving quantizes parameters to single precision;
# a save -> load -> save round trip is byte-identical.


def save_checkpoint(model: HeadModel, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = list(model.named_parameters())
    cfg = model.config
    config = {
        "format": "poolprobe-checkpoint",
        "version": 1,
        "pooling_method": cfg.pooling_method,
        "d_enc": cfg.d_enc,
        "d_model": cfg.d_model,
        "num_heads": cfg.num_heads,
        "d_hidden": cfg.d_hidden,
        "num_classes": cfg.num_classes,
        "dropout_rate": cfg.dropout_rate,
        "encoder_layer": cfg.encoder_layer,
        "tensors": {name: f"{name}.fea" for name in names},
    }
    (directory / CHECKPOINT_CONFIG).write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    for name, tensor in model.named_parameters().items():
        write_features(tensor.data, directory / f"{name}.fea")


def load_checkpoint(directory) -> HeadModel:
    directory = Path(directory)
    config = json.loads((directory / CHECKPOINT_CONFIG).read_text())
    if config.get("format") != "poolprobe-checkpoint":
        raise ConfigError(f"{directory}: not a checkpoint directory")
    cfg = ModelConfig(
        d_enc=config["d_enc"],
        num_classes=config["num_classes"],
        pooling_method=config["pooling_method"],
        d_model=config["d_model"],
        num_heads=config["num_heads"],
        d_hidden=config["d_hidden"],
        dropout_rate=config["dropout_rate"],
        encoder_layer=config["encoder_layer"],
    )
    model = HeadModel.initialize(cfg, seed=0)
    for name, tensor in model.named_parameters().items():
        stored = read_features(directory / config["tensors"][name]).data
        if stored.shape != tensor.data.shape:
            raise ShapeError(
                f"checkpoint tensor {name} has shape {stored.shape}, "
                f"expected {tensor.data.shape}"
            )
        tensor.data = stored
    return model
