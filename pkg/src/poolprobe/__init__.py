"""Training/evaluation engine for attention-pooling heads over frozen
speech-encoder representations, on a minimal reverse-mode autodiff core."""

from .diffcore import ComputationTape, Tensor, backward
from .featurestore import (
    DatasetManifest,
    FeatureSource,
    RepresentationMatrix,
    UtteranceRecord,
    gen_synthetic,
    load_manifest,
    read_features,
    save_manifest,
    write_features,
)
from .metrics import (
    AggregateReport,
    ConfusionMatrix,
    FoldReport,
    aggregate_reports,
    emit_report,
    fold_report,
    macro_f1,
    unweighted_accuracy,
    weighted_accuracy,
)
from .model import (
    HeadModel,
    ModelConfig,
    attentive_pool,
    classify,
    count_trainable_params,
    forward,
    load_checkpoint,
    mean_pool,
    project,
    qkv_pool,
    save_checkpoint,
)
from .published import PublishedResult, external_baseline, published_reference
from .training import (
    OptimizerState,
    TrainConfig,
    adamw_step,
    cosine_lr,
    cross_entropy,
    cross_validate,
    evaluate,
    train_fold,
)

__version__ = "0.1.0"
