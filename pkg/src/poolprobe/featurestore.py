"""Feature files, dataset manifests, and the planted-saliency generator.

Feature file format ``FEA1`` (bit-exact, little-endian):

    bytes 0-3    magic ``FEA1``
    bytes 4-7    uint32  T  (frame count)
    bytes 8-11   uint32  d  (vector width)
    bytes 12-    T*d IEEE-754 float32 values, row-major (frame-major)

No padding, no footer. Values are stored single precision and promoted to
double on read.

Manifest format (one record per line plus a header block; ``#`` starts a
comment, blank lines are ignored, paths are relative to the manifest file):

    classes: anger,happiness,sadness,neutral
    folds: 5
    width: 768
    layers: 4,8

    utt0001|2|0|0|4=features/utt0001_l4.fea;8=features/utt0001_l8.fea

Record fields are ``id|label_index|group_id|fold_id|layer=path[;...]``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    FeatureFormatError,
    FeatureLengthError,
    ManifestError,
    ManifestFileError,
    ManifestFoldError,
    ManifestLabelError,
)

FEATURE_MAGIC = b"FEA1"
_HEADER = struct.Struct("<4sII")

# Planted class signatures are drawn N(0,1) per entry and scaled by this
# factor, so a salient frame carries a strong signature on top of unit noise.
SIGNATURE_SCALE = 3.0


@dataclass
class RepresentationMatrix:
    """T x d matrix of per-frame encoder vectors for one utterance."""

    data: np.ndarray
    utterance_id: str | None = None
    model_size: str | None = None
    layer: int | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise FeatureFormatError(
                f"representation must be 2-D, got ndim={self.data.ndim}"
            )

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def write_features(matrix, path) -> None:
    """Write a matrix to ``path`` in the FEA1 format.

    Accepts a RepresentationMatrix or any 2-D array. Values must be finite
    and must stay finite after the cast to float32.
    """
    data = matrix.data if isinstance(matrix, RepresentationMatrix) else np.asarray(matrix)
    if data.ndim != 2:
        raise FeatureFormatError(f"feature matrix must be 2-D, got ndim={data.ndim}")
    if not np.isfinite(data).all():
        raise ValueError("refusing to write non-finite feature values")
    with np.errstate(over="ignore"):
        payload = np.ascontiguousarray(data, dtype="<f4")
    if not np.isfinite(payload).all():
        raise ValueError("feature values overflow single precision")
    t, d = payload.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEATURE_MAGIC, t, d))
        fh.write(payload.tobytes())


def read_features(path) -> RepresentationMatrix:
    """Read a FEA1 file; values come back as float64."""
    raw = Path(path).read_bytes()
    if len(raw) >= 4 and raw[:4] != FEATURE_MAGIC:
        raise FeatureFormatError(
            f"{path}: bad magic {raw[:4]!r}, expected {FEATURE_MAGIC!r}"
        )
    if len(raw) < _HEADER.size:
        raise FeatureLengthError(f"{path}: {len(raw)} bytes is too short for a header")
    _, t, d = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 4 * t * d
    if len(raw) != expected:
        raise FeatureLengthError(
            f"{path}: header claims {t}x{d} ({expected} bytes) but file has {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(t, d)
    if not np.isfinite(values).all():
        raise ValueError(f"{path}: stored values include NaN/Inf")
    return RepresentationMatrix(values.astype(np.float64))


@dataclass
class UtteranceRecord:
    utterance_id: str
    label: int
    group: int
    fold: int
    feature_paths: dict[int, str] = field(default_factory=dict)


@dataclass
class DatasetManifest:
    """Utterance records plus the class vocabulary and fold layout."""

    class_names: list[str]
    fold_count: int
    width: int
    layers: list[int]
    records: list[UtteranceRecord]
    root: Path | None = None

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def records_in_fold(self, fold: int) -> list[UtteranceRecord]:
        return [r for r in self.records if r.fold == fold]

    def records_outside_fold(self, fold: int) -> list[UtteranceRecord]:
        return [r for r in self.records if r.fold != fold]

    def feature_path(self, record: UtteranceRecord, layer: int) -> Path:
        try:
            rel = record.feature_paths[layer]
        except KeyError:
            raise DataError(
                f"record {record.utterance_id} has no features for layer {layer}"
            ) from None
        return (self.root / rel) if self.root is not None else Path(rel)

    def validate(self, check_files: bool = False) -> None:
        if len(self.class_names) < 2:
            raise ManifestError("manifest needs at least 2 classes")
        if self.fold_count < 1:
            raise ManifestFoldError(f"fold count must be positive, got {self.fold_count}")
        seen_folds = set()
        for rec in self.records:
            if not 0 <= rec.label < self.num_classes:
                raise ManifestLabelError(
                    f"record {rec.utterance_id}: label {rec.label} outside "
                    f"[0, {self.num_classes})"
                )
            if not 0 <= rec.fold < self.fold_count:
                raise ManifestFoldError(
                    f"record {rec.utterance_id}: fold {rec.fold} outside "
                    f"[0, {self.fold_count})"
                )
            seen_folds.add(rec.fold)
            for layer in rec.feature_paths:
                if layer not in self.layers:
                    raise ManifestError(
                        f"record {rec.utterance_id}: layer {layer} not declared "
                        f"in manifest layers {self.layers}"
                    )
        missing = set(range(self.fold_count)) - seen_folds
        if missing:
            raise ManifestFoldError(f"folds without records: {sorted(missing)}")
        if check_files:
            for rec in self.records:
                for layer in rec.feature_paths:
                    p = self.feature_path(rec, layer)
                    if not p.exists():
                        raise ManifestFileError(
                            f"record {rec.utterance_id}: missing feature file {p}"
                        )


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    lines = [
        f"classes: {','.join(manifest.class_names)}",
        f"folds: {manifest.fold_count}",
        f"width: {manifest.width}",
        f"layers: {','.join(str(l) for l in manifest.layers)}",
        "",
    ]
    for rec in manifest.records:
        paths = ";".join(f"{layer}={rel}" for layer, rel in sorted(rec.feature_paths.items()))
        lines.append(f"{rec.utterance_id}|{rec.label}|{rec.group}|{rec.fold}|{paths}")
    path.write_text("\n".join(lines) + "\n")


def load_manifest(path, check_files: bool = False) -> DatasetManifest:
    """Parse and fully validate a manifest file."""
    path = Path(path)
    header: dict[str, str] = {}
    records: list[UtteranceRecord] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "|" in line:
            parts = line.split("|")
            if len(parts) != 5:
                raise ManifestError(f"{path}:{lineno}: expected 5 '|' fields, got {len(parts)}")
            utt, label_s, group_s, fold_s, paths_s = parts
            feature_paths: dict[int, str] = {}
            if paths_s:
                for chunk in paths_s.split(";"):
                    layer_s, _, rel = chunk.partition("=")
                    if not rel:
                        raise ManifestError(f"{path}:{lineno}: malformed layer=path '{chunk}'")
                    feature_paths[int(layer_s)] = rel
            try:
                records.append(
                    UtteranceRecord(utt, int(label_s), int(group_s), int(fold_s), feature_paths)
                )
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
        elif ":" in line:
            key, _, value = line.partition(":")
            header[key.strip()] = value.strip()
        else:
            raise ManifestError(f"{path}:{lineno}: unrecognized line {line!r}")
    for key in ("classes", "folds", "width", "layers"):
        if key not in header:
            raise ManifestError(f"{path}: missing header field '{key}'")
    manifest = DatasetManifest(
        class_names=[c.strip() for c in header["classes"].split(",") if c.strip()],
        fold_count=int(header["folds"]),
        width=int(header["width"]),
        layers=[int(l) for l in header["layers"].split(",") if l.strip()],
        records=records,
        root=path.parent,
    )
    manifest.validate(check_files=check_files)
    return manifest


class FeatureSource:
    """Loads feature matrices referenced by a manifest, with an in-memory cache.

    Set ``max_cached`` to bound memory when matrices are large; the default
    keeps everything, which is right for desk-scale runs.
    """

    def __init__(self, manifest: DatasetManifest, max_cached: int | None = None):
        self._manifest = manifest
        self._max_cached = max_cached
        self._cache: dict[tuple[str, int], np.ndarray] = {}

    def matrix(self, record: UtteranceRecord, layer: int) -> np.ndarray:
        key = (record.utterance_id, layer)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        data = read_features(self._manifest.feature_path(record, layer)).data
        if self._max_cached is None or len(self._cache) < self._max_cached:
            self._cache[key] = data
        return data

    def __getstate__(self):
        return {"_manifest": self._manifest, "_max_cached": self._max_cached}

    def __setstate__(self, state):
        self._manifest = state["_manifest"]
        self._max_cached = state["_max_cached"]
        self._cache = {}


SYNTHETIC_LAYER = 0


def gen_synthetic(
    classes: int,
    per_class: int,
    frames: int,
    d_enc: int,
    salient_frames: int,
    noise_sigma: float,
    seed: int,
    out_dir,
    folds: int = 5,
) -> DatasetManifest:
    """Generate a planted-saliency dataset and write it under ``out_dir``.

    Each utterance is i.i.d. Gaussian noise except ``salient_frames``
    uniformly-random frame positions, which additionally carry a fixed
    per-class signature vector. Folds are assigned round-robin by record
    index. The whole tree is a pure function of the arguments.

    The per-class signatures are also written to ``signatures.fea`` (one row
    per class) so tests can check recoverability against ground truth.
    """
    if classes < 2:
        raise ConfigError(f"need at least 2 classes, got {classes}")
    if per_class < 1:
        raise ConfigError(f"need at least 1 utterance per class, got {per_class}")
    if not 1 <= salient_frames <= frames:
        raise ConfigError(
            f"salient_frames must lie in [1, {frames}], got {salient_frames}"
        )
    if noise_sigma < 0:
        raise ConfigError(f"noise sigma must be non-negative, got {noise_sigma}")
    if folds < 1:
        raise ConfigError(f"fold count must be positive, got {folds}")

    out_dir = Path(out_dir)
    feat_dir = out_dir / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    signatures = rng.normal(0.0, 1.0, size=(classes, d_enc)) * SIGNATURE_SCALE
    write_features(signatures, out_dir / "signatures.fea")

    class_names = [f"class{c}" for c in range(classes)]
    records: list[UtteranceRecord] = []
    index = 0
    for c in range(classes):
        for u in range(per_class):
            matrix = rng.normal(0.0, noise_sigma, size=(frames, d_enc))
            positions = rng.choice(frames, size=salient_frames, replace=False)
            matrix[positions] += signatures[c]
            rel = f"features/c{c}u{u:04d}.fea"
            write_features(matrix, out_dir / rel)
            fold = index % folds
            records.append(
                UtteranceRecord(
                    utterance_id=f"c{c}u{u:04d}",
                    label=c,
                    group=fold,
                    fold=fold,
                    feature_paths={SYNTHETIC_LAYER: rel},
                )
            )
            index += 1

    manifest = DatasetManifest(
        class_names=class_names,
        fold_count=folds,
        width=d_enc,
        layers=[SYNTHETIC_LAYER],
        records=records,
        root=out_dir,
    )
    manifest.validate()
    save_manifest(manifest, out_dir / "manifest.txt")
    return manifest
