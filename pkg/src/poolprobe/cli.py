"""Command-line entry point for reproducible experiment runs.

Every command writes ``config_echo.json`` into its output directory with
all effective parameters and the seed, so every emitted number traces back
to an exact invocation. Commands exit nonzero on any failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .errors import PoolprobeError
from .featurestore import FeatureSource, gen_synthetic, load_manifest
from .gradcheck import DEFAULT_TOLERANCE, model_gradcheck
from .metrics import emit_report, format_mean_std
from .model import POOLING_METHODS, ModelConfig, save_checkpoint
from .published import published_reference
from .training import TrainConfig, cross_validate, evaluate, train_fold
from . import metrics as metrics_mod


def _write_config_echo(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = {"command": command}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        echo[key] = str(value) if isinstance(value, Path) else value
    (out_dir / "config_echo.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")


def _parse_layers(spec: str) -> list[int]:
    spec = spec.strip()
    if not spec:
        return []
    if ".." in spec:
        lo, _, hi = spec.partition("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(chunk) for chunk in spec.split(",") if chunk.strip()]


def _resolve_layer(manifest, layer: int | None) -> int:
    if layer is not None:
        return layer
    if len(manifest.layers) == 1:
        return manifest.layers[0]
    raise PoolprobeError(
        f"manifest stores layers {manifest.layers}; pick one with --layer"
    )


def _model_config(args, manifest, layer: int) -> ModelConfig:
    return ModelConfig(
        d_enc=manifest.width,
        num_classes=manifest.num_classes,
        pooling_method=args.pooling,
        d_model=args.d_model,
        num_heads=args.heads,
        d_hidden=args.d_hidden,
        dropout_rate=args.dropout,
        encoder_layer=layer,
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        peak_lr=args.peak_lr,
        warmup_fraction=args.warmup,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )


def _add_model_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pooling", choices=POOLING_METHODS, default="qkv")
    p.add_argument("--heads", type=int, default=6)
    p.add_argument("--d-hidden", type=int, default=4)
    p.add_argument("--d-model", type=int, default=256)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--layer", type=int, default=None, help="encoder layer (default: the manifest's only layer)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--peak-lr", type=float, default=1e-4)
    p.add_argument("--warmup", type=float, default=0.10, help="warmup fraction of total steps")
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="fold-level parallelism")


def cmd_gen_synthetic(args) -> int:
    out = Path(args.out)
    manifest = gen_synthetic(
        classes=args.classes,
        per_class=args.per_class,
        frames=args.frames,
        d_enc=args.d_enc,
        salient_frames=args.salient,
        noise_sigma=args.sigma,
        seed=args.seed,
        out_dir=out,
        folds=args.folds,
    )
    _write_config_echo(out, "gen-synthetic", args)
    print(f"wrote {len(manifest.records)} utterances to {out}")
    return 0


def cmd_cross_validate(args) -> int:
    manifest = load_manifest(args.manifest)
    layer = _resolve_layer(manifest, args.layer)
    model_cfg = _model_config(args, manifest, layer)
    train_cfg = _train_config(args)
    out = Path(args.out)
    _write_config_echo(out, "cross-validate", args)
    reports, aggregate = cross_validate(
        manifest, FeatureSource(manifest), model_cfg, train_cfg, jobs=args.jobs
    )
    emit_report(
        reports,
        aggregate,
        config={"pooling": args.pooling, "heads": args.heads, "d_hidden": args.d_hidden,
                "layer": layer, "folds": manifest.fold_count, "seed": args.seed},
        out_dir=out,
    )
    print(f"WA {format_mean_std(aggregate.wa_mean, aggregate.wa_std)}  "
          f"UA {format_mean_std(aggregate.ua_mean, aggregate.ua_std)}  "
          f"F1 {format_mean_std(aggregate.f1_mean, aggregate.f1_std)}")
    return 0


def cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    layer = _resolve_layer(manifest, args.layer)
    model_cfg = _model_config(args, manifest, layer)
    train_cfg = _train_config(args)
    out = Path(args.out)
    _write_config_echo(out, "train", args)
    features = FeatureSource(manifest)
    model, history = train_fold(manifest, features, args.fold, model_cfg, train_cfg)
    held_out = manifest.records_in_fold(args.fold)
    cm = evaluate(model, held_out, features, manifest)
    report = metrics_mod.fold_report(args.fold, cm)
    save_checkpoint(model, out / "checkpoint")
    emit_report(
        [report],
        metrics_mod.aggregate_reports([report]),
        config={"pooling": args.pooling, "heads": args.heads, "d_hidden": args.d_hidden,
                "layer": layer, "fold": args.fold, "seed": args.seed},
        out_dir=out,
    )
    last = history[-1]
    print(f"fold {args.fold}: final train loss {last.mean_loss:.4f} "
          f"acc {last.accuracy:.3f}; held-out WA {report.wa:.3f} UA {report.ua:.3f}")
    return 0


def cmd_sweep_layers(args) -> int:
    layers = _parse_layers(args.layers)
    if not layers:
        raise PoolprobeError("empty layer list")
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    _write_config_echo(out, "sweep-layers", args)
    train_cfg = _train_config(args)
    rows = [["layer", "wa_mean", "wa_std", "ua_mean", "ua_std", "f1_mean", "f1_std"]]
    for layer in layers:
        for rec in manifest.records:
            if layer not in rec.feature_paths:
                raise PoolprobeError(
                    f"record {rec.utterance_id} has no features for layer {layer}"
                )
        model_cfg = _model_config(args, manifest, layer)
        reports, aggregate = cross_validate(
            manifest, FeatureSource(manifest), model_cfg, train_cfg, jobs=args.jobs
        )
        emit_report(
            reports,
            aggregate,
            config={"pooling": args.pooling, "heads": args.heads,
                    "d_hidden": args.d_hidden, "layer": layer, "seed": args.seed},
            out_dir=out / f"layer{layer}",
        )
        rows.append([
            layer,
            repr(aggregate.wa_mean), repr(aggregate.wa_std),
            repr(aggregate.ua_mean), repr(aggregate.ua_std),
            repr(aggregate.f1_mean), repr(aggregate.f1_std),
        ])
        print(f"layer {layer}: WA {format_mean_std(aggregate.wa_mean, aggregate.wa_std)} "
              f"UA {format_mean_std(aggregate.ua_mean, aggregate.ua_std)}")
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    (out / "layers_summary.csv").write_text(buf.getvalue())
    return 0


def cmd_gradcheck(args) -> int:
    methods = list(POOLING_METHODS) if args.method == "all" else [args.method]
    if args.out:
        _write_config_echo(Path(args.out), "gradcheck", args)
    failed = False
    for method in methods:
        errors = model_gradcheck(method, seed=args.seed)
        for name, err in errors.items():
            ok = err <= DEFAULT_TOLERANCE
            failed = failed or not ok
            print(f"{method:<10}{name:<24}max rel err {err:.3e}  "
                  f"{'ok' if ok else 'FAIL'}")
    return 1 if failed else 0


def cmd_report(args) -> int:
    ref = published_reference(args.dataset, args.size, args.pooling, args.layer)
    if args.out:
        _write_config_echo(Path(args.out), "report", args)
    line = f"{args.dataset} {args.size} {args.pooling}"
    if args.layer is not None:
        line += f" layer {args.layer}"
    print(f"{line}: WA {ref.wa:.2f} ± {ref.wa_std:.2f}  UA {ref.ua:.2f} ± {ref.ua_std:.2f}"
          + (f"  F1 {ref.f1:.2f} ± {ref.f1_std:.2f}" if ref.f1 is not None else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poolprobe",
        description="Train and evaluate pooling heads over frozen encoder features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a planted-saliency dataset")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=25)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--d-enc", type=int, default=32)
    p.add_argument("--salient", type=int, default=5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("cross-validate", help="k-fold cross-validation run")
    p.add_argument("--manifest", required=True)
    _add_model_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cross_validate)

    p = sub.add_parser("train", help="train one fold and save a checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fold", type=int, required=True)
    _add_model_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep-layers", help="cross-validate every encoder layer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--layers", required=True, help="e.g. '1..12' or '1,4,8'")
    _add_model_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_layers)

    p = sub.add_parser("gradcheck", help="finite-difference check of model gradients")
    p.add_argument("--method", choices=POOLING_METHODS + ("all",), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="look up published reference results")
    p.add_argument("--dataset", required=True)
    p.add_argument("--size", required=True)
    p.add_argument("--pooling", required=True)
    p.add_argument("--layer", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PoolprobeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
