"""Command-line extraction runs.

Walks the dataset, preprocesses each audio file, dumps the requested
encoder layers as FEA1 files under ``<out>/features/``, and writes a
manifest the engine can load directly. Per-file failures are logged to
stderr and skipped; the manifest only lists successful extractions.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .audio import load_audio, log_mel
from .datasets import generic_labels, iemocap_labels, shemo_labels, write_manifest
from .encoder import ENCODER_SIZES, EncoderRunner
from .fea import write_fea


def _parse_layers(spec: str) -> list[int]:
    spec = spec.strip()
    if not spec:
        return []
    if ".." in spec:
        lo, _, hi = spec.partition("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(chunk) for chunk in spec.split(",") if chunk.strip()]


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def run_extraction(args) -> int:
    layers = _parse_layers(args.layers)
    if not layers:
        _log("error: empty layer list")
        return 1
    audio_dir = Path(args.audio_dir)

    if args.kind == "shemo":
        files = sorted(str(p.relative_to(audio_dir)) for p in audio_dir.rglob("*.wav"))
        class_names, utterances = shemo_labels(files)
    elif args.kind == "iemocap":
        if not args.labels:
            _log("error: --labels table required for iemocap-style datasets")
            return 1
        class_names, utterances = iemocap_labels(args.labels)
    else:
        if not args.labels:
            _log("error: --labels table required for generic datasets")
            return 1
        class_names, utterances = generic_labels(args.labels)

    if not utterances:
        _log("error: no labeled utterances found")
        return 1

    runner = EncoderRunner(args.size, random_init=args.random_init, seed=args.seed)
    runner.validate_layers(layers)

    out = Path(args.out)
    feat_dir = out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)

    manifest_records = []
    folds_seen = set()
    for utt in utterances:
        audio_path = audio_dir / utt.file
        try:
            mel = log_mel(load_audio(audio_path))
            states = runner.layer_states(mel, layers)
        except Exception as exc:
            _log(f"skip {utt.file}: {exc}")
            continue
        feature_paths = {}
        for layer, matrix in states.items():
            rel = f"features/{utt.utterance_id}_l{layer}.fea"
            write_fea(matrix, out / rel)
            feature_paths[layer] = rel
        manifest_records.append((utt, feature_paths))
        folds_seen.add(utt.fold)
        _log(f"ok {utt.file}: {len(states)} layer(s)")

    if not manifest_records:
        _log("error: every file failed extraction")
        return 1
    # skipped files (or sparse label tables) can leave folds empty, which a
    # valid manifest must not have; compact fold ids, keeping their order
    present = sorted(folds_seen)
    remap = {fold: i for i, fold in enumerate(present)}
    if any(fold != i for fold, i in remap.items()):
        _log(f"compacting fold ids {present} -> 0..{len(present) - 1}")
        for utt, _ in manifest_records:
            utt.fold = remap[utt.fold]
    write_manifest(
        out / "manifest.txt", class_names, len(present), runner.width, layers, manifest_records
    )
    _log(f"wrote {len(manifest_records)} utterances to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whisper-extract",
        description="Dump per-layer frozen-encoder representations for the poolprobe engine.",
    )
    parser.add_argument("--kind", choices=("shemo", "iemocap", "generic"), required=True)
    parser.add_argument("--audio-dir", required=True)
    parser.add_argument("--labels", default=None, help="CSV label table (iemocap/generic kinds)")
    parser.add_argument("--size", choices=tuple(ENCODER_SIZES), required=True)
    parser.add_argument("--layers", required=True, help="e.g. '1..12' or '1,4,8'")
    parser.add_argument("--out", required=True)
    parser.add_argument(
        "--random-init",
        action="store_true",
        help="seeded random weights instead of pretrained (offline testing)",
    )
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_extraction(args)
    except (ValueError, RuntimeError, OSError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
