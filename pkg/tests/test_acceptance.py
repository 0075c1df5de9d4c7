"""Acceptance suite: one test per release criterion, at pinned tolerances.

Each test prints a single ``ACCEPTANCE <n>: PASS/FAIL`` line (visible with
``pytest -s`` or on failure) in addition to its assertions.
"""

import time

import numpy as np
import pytest

from poolprobe import diffcore as dc
from poolprobe import featurestore as fs
from poolprobe import metrics as mx
from poolprobe import model as mdl
from poolprobe.diffcore import Tensor
from poolprobe.errors import FeatureFormatError, FeatureLengthError
from poolprobe.featurestore import FeatureSource, gen_synthetic
from poolprobe.gradcheck import model_gradcheck
from poolprobe.metrics import emit_report
from poolprobe.model import HeadModel, ModelConfig
from poolprobe.training import (
    OptimizerState,
    TrainConfig,
    adamw_step,
    cosine_lr,
    cross_validate,
    evaluate,
    run_fold,
    train_fold,
)

from oracles import (
    attentive_head_dicts,
    loop_attentive_pool,
    loop_mean_pool,
    loop_qkv_pool,
    qkv_head_dicts,
)


def report_line(number: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {number}: {detail}"


def test_criterion_1_gradient_correctness():
    """Analytic gradients match central finite differences for every
    parameter of every pooling method; rel err <= 1e-4, runtime < 60 s."""
    start = time.time()
    worst = {}
    for method in ("mean", "attentive", "qkv"):
        errors = model_gradcheck(
            method, d_enc=10, d_model=8, frames=7, num_heads=2, d_hidden=3,
            num_classes=4, h=1e-6, seed=0,
        )
        worst[method] = max(errors.values())
    elapsed = time.time() - start
    ok = all(err <= 1e-4 for err in worst.values()) and elapsed < 60.0
    detail = (
        "max rel err "
        + ", ".join(f"{m}={e:.2e}" for m, e in worst.items())
        + f" (tol 1e-4), {elapsed:.1f}s (< 60s)"
    )
    report_line(1, ok, detail)


def test_criterion_2_oracle_equivalence():
    """Pooling forward matches an independent loop re-implementation to
    1e-9 on 100 random configurations with T <= 10 and dims <= 8."""
    rng = np.random.default_rng(2024)
    worst = 0.0
    for case in range(100):
        method = ("mean", "attentive", "qkv")[case % 3]
        t = int(rng.integers(1, 11))
        d_model = int(rng.integers(2, 9))
        heads = int(rng.integers(1, 4))
        d_hidden = int(rng.integers(1, 9))
        model = HeadModel.initialize(
            ModelConfig(
                d_enc=4, num_classes=2, pooling_method=method,
                d_model=d_model, num_heads=heads, d_hidden=d_hidden,
            ),
            seed=int(rng.integers(10_000)),
        )
        for head in model.heads:
            if hasattr(head, "score_bias"):
                head.score_bias.data[:] = rng.normal(size=head.score_bias.shape)
                head.score_offset.data[:] = rng.normal()
        h = rng.normal(size=(t, d_model))
        ours = mdl.pool(Tensor(h), model).data[0]
        if method == "mean":
            expected = loop_mean_pool(h.tolist())
        elif method == "attentive":
            expected = loop_attentive_pool(
                h.tolist(), attentive_head_dicts(model), model.merge.data.tolist()
            )
        else:
            expected = loop_qkv_pool(
                h.tolist(), qkv_head_dicts(model), model.merge.data.tolist()
            )
        worst = max(worst, float(np.max(np.abs(ours - np.asarray(expected)))))
    report_line(2, worst <= 1e-9, f"100 configs, max |engine - oracle| = {worst:.2e} (tol 1e-9)")


def test_criterion_3_permutation_invariance_and_weight_normalization():
    """Row-permuted input pools identically to 1e-9; per-head attention
    weights sum to 1 +- 1e-9, over 100 random cases per method."""
    rng = np.random.default_rng(77)
    worst_perm = 0.0
    worst_sum = 0.0
    for method in ("mean", "attentive", "qkv"):
        for _ in range(100):
            t = int(rng.integers(2, 11))
            model = HeadModel.initialize(
                ModelConfig(
                    d_enc=4, num_classes=2, pooling_method=method,
                    d_model=int(rng.integers(2, 9)), num_heads=int(rng.integers(1, 4)),
                    d_hidden=int(rng.integers(1, 9)),
                ),
                seed=int(rng.integers(10_000)),
            )
            h = rng.normal(size=(t, model.config.d_model))
            details = {}
            base = mdl.pool(Tensor(h), model, details=details).data
            permuted = mdl.pool(Tensor(h[rng.permutation(t)]), model).data
            worst_perm = max(worst_perm, float(np.max(np.abs(base - permuted))))
            for weights in details.get("head_weights", []):
                worst_sum = max(worst_sum, abs(float(weights.sum()) - 1.0))
                assert (weights > 0).all()
    ok = worst_perm <= 1e-9 and worst_sum <= 1e-9
    report_line(
        3, ok,
        f"permutation gap {worst_perm:.2e} (tol 1e-9), "
        f"weight-sum gap {worst_sum:.2e} (tol 1e-9)",
    )


def test_criterion_4_parameter_count():
    """Trainable parameter count for (d_enc=768, mean, 4 classes)."""
    model = HeadModel.initialize(
        ModelConfig(d_enc=768, num_classes=4, pooling_method="mean"), 0
    )
    count = mdl.count_trainable_params(model)
    report_line(4, count == 197_632, f"count = {count} (expected 197632)")


def test_criterion_5_overfit_check(tmp_path):
    """All three pooling methods reach 100% train accuracy on the
    fully-salient noiseless set within 30 epochs under protocol-default
    hyperparameters; runtime < 5 min."""
    start = time.time()
    manifest = gen_synthetic(
        classes=4, per_class=10, frames=50, d_enc=32,
        salient_frames=50, noise_sigma=0.0, seed=0, out_dir=tmp_path,
    )
    features = FeatureSource(manifest)
    accuracies = {}
    for method in ("mean", "attentive", "qkv"):
        cfg = ModelConfig(
            d_enc=32, num_classes=4, pooling_method=method, num_heads=2, d_hidden=4
        )
        model, _ = train_fold(manifest, features, 0, cfg, TrainConfig(seed=1))
        train_records = manifest.records_outside_fold(0)
        cm = evaluate(model, train_records, features, manifest)
        accuracies[method] = mx.weighted_accuracy(cm)
    elapsed = time.time() - start
    ok = all(acc == 1.0 for acc in accuracies.values()) and elapsed < 300.0
    detail = (
        "train acc "
        + ", ".join(f"{m}={a:.3f}" for m, a in accuracies.items())
        + f" (need 1.0), {elapsed:.0f}s (< 300s)"
    )
    report_line(5, ok, detail)


def test_criterion_6_saliency_advantage(tmp_path):
    """On the planted-saliency set, attentive and QKV pooling beat mean
    pooling's held-out UA by >= 5 points, averaged over 5 seeds."""
    manifest = gen_synthetic(
        classes=4, per_class=100, frames=200, d_enc=32,
        salient_frames=2, noise_sigma=1.0, seed=0, out_dir=tmp_path,
    )
    features = FeatureSource(manifest)
    mean_ua = {}
    for method in ("mean", "attentive", "qkv"):
        cfg = ModelConfig(
            d_enc=32, num_classes=4, pooling_method=method,
            d_model=64, num_heads=2, d_hidden=8,
        )
        uas = []
        for seed in range(5):
            report, _ = run_fold(
                manifest, features, 0, cfg,
                TrainConfig(seed=seed, epochs=20, peak_lr=3e-3),
            )
            uas.append(report.ua)
        mean_ua[method] = float(np.mean(uas))
    gap_attentive = mean_ua["attentive"] - mean_ua["mean"]
    gap_qkv = mean_ua["qkv"] - mean_ua["mean"]
    ok = gap_attentive >= 0.05 and gap_qkv >= 0.05
    detail = (
        f"UA mean={mean_ua['mean']:.3f} attentive={mean_ua['attentive']:.3f} "
        f"qkv={mean_ua['qkv']:.3f}; gaps +{100*gap_attentive:.1f}pp / "
        f"+{100*gap_qkv:.1f}pp (need >= 5pp)"
    )
    report_line(6, ok, detail)


def test_criterion_7_scheduler_and_optimizer_units():
    """Cosine schedule hits its peak at warmup end and 0 at the final step;
    a zero-gradient AdamW step scales weights by exactly (1 - lr*decay)."""
    cfg = TrainConfig(peak_lr=1e-4, warmup_fraction=0.10)
    total = 600
    warmup = round(0.10 * total)
    at_peak = cosine_lr(warmup, total, cfg)
    at_end = cosine_lr(total, total, cfg)
    sched_ok = abs(at_peak - 1e-4) <= 1e-12 and abs(at_end) <= 1e-12

    opt_cfg = TrainConfig(weight_decay=0.05)
    w = Tensor(np.array([[1.25, -0.5], [3.0, 0.0]]))
    before = w.data.copy()
    lr = 2e-3
    adamw_step({"w": w}, {"w": np.zeros((2, 2))}, OptimizerState(), lr, opt_cfg)
    opt_ok = np.array_equal(w.data, before * (1.0 - lr * opt_cfg.weight_decay))

    report_line(
        7, sched_ok and opt_ok,
        f"lr(warmup)={at_peak:.6e}, lr(total)={at_end:.1e} (±1e-12); "
        f"zero-grad decay exact: {opt_ok}",
    )


def test_criterion_8_metric_units():
    """WA/UA/F1 on the hand-computed 2x2 matrix and on diagonal matrices."""
    cm = mx.ConfusionMatrix(np.array([[3, 1], [1, 1]]), ["a", "b"])
    wa = mx.weighted_accuracy(cm)
    ua = mx.unweighted_accuracy(cm)
    f1 = mx.macro_f1(cm)
    diag = mx.ConfusionMatrix(np.diag([4, 2, 9]), ["a", "b", "c"])
    diag_ok = (
        mx.weighted_accuracy(diag) == 1.0
        and mx.unweighted_accuracy(diag) == 1.0
        and mx.macro_f1(diag) == 1.0
    )
    ok = abs(wa - 0.6667) <= 1e-4 and ua == 0.625 and f1 == 0.625 and diag_ok
    report_line(
        8, ok,
        f"WA={wa:.4f} (0.6667±1e-4), UA={ua} (0.625), F1={f1} (0.625), "
        f"diagonal all 1.0: {diag_ok}",
    )


def test_criterion_9_determinism(tmp_path):
    """Two cross-validation runs with identical seeds emit byte-identical
    CSV reports."""
    manifest = gen_synthetic(
        classes=3, per_class=6, frames=10, d_enc=16,
        salient_frames=3, noise_sigma=0.5, seed=4, out_dir=tmp_path / "data", folds=3,
    )
    features = FeatureSource(manifest)
    cfg = ModelConfig(d_enc=16, num_classes=3, pooling_method="qkv",
                      d_model=16, num_heads=2, d_hidden=3)
    outputs = []
    for sub in ("a", "b"):
        reports, aggregate = cross_validate(
            manifest, features, cfg, TrainConfig(seed=11, epochs=2)
        )
        emit_report(reports, aggregate, {"seed": 11}, tmp_path / sub)
        outputs.append(
            {
                p.name: p.read_bytes()
                for p in sorted((tmp_path / sub).iterdir())
                if p.suffix in (".csv", ".txt")
            }
        )
    ok = outputs[0] == outputs[1]
    report_line(9, ok, f"{len(outputs[0])} report files byte-identical: {ok}")


def test_criterion_10_feature_format(tmp_path):
    """FEA1 round trip is bitwise exact; corrupted magic and corrupted
    length raise distinct errors."""
    rng = np.random.default_rng(5)
    matrix = rng.normal(size=(9, 6))
    path = tmp_path / "m.fea"
    fs.write_features(matrix, path)
    first = path.read_bytes()
    fs.write_features(fs.read_features(path).data, path)
    roundtrip_ok = path.read_bytes() == first

    bad_magic = tmp_path / "magic.fea"
    bad_magic.write_bytes(b"XXXX" + first[4:])
    try:
        fs.read_features(bad_magic)
        magic_ok = False
    except FeatureFormatError:
        magic_ok = True
    except Exception:
        magic_ok = False

    truncated = tmp_path / "short.fea"
    truncated.write_bytes(first[:-3])
    try:
        fs.read_features(truncated)
        length_ok = False
    except FeatureLengthError:
        length_ok = True
    except Exception:
        length_ok = False

    ok = roundtrip_ok and magic_ok and length_ok
    report_line(
        10, ok,
        f"round trip bitwise: {roundtrip_ok}, magic error distinct: {magic_ok}, "
        f"length error distinct: {length_ok}",
    )
