"""Confusion matrices, accuracy metrics, fold aggregation, and report files.

Weighted Accuracy (WA) is overall accuracy, trace/total. Unweighted
Accuracy (UA) is the mean per-class recall. F1 is macro-averaged. Classes
with zero support are dropped from the UA/F1 averages (a held-out fold of a
small class can be empty); their per-class entries report 0 by convention.

Report files are CSV with a header row, comma separators, ``.`` decimals,
and LF line endings, plus a human-readable summary in ``mean ± std`` form
on the percentage scale with two decimals.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass
class ConfusionMatrix:
    """Square count matrix: counts[i][j] = true class i predicted as j."""

    counts: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise DataError(f"confusion matrix must be square, got {self.counts.shape}")
        if self.counts.shape[0] != len(self.class_names):
            raise DataError(
                f"{len(self.class_names)} class names for a "
                f"{self.counts.shape[0]}-class matrix"
            )
        if (self.counts < 0).any():
            raise DataError("confusion counts must be non-negative")

    @classmethod
    def from_pairs(cls, true_labels, predicted_labels, class_names) -> "ConfusionMatrix":
        n = len(class_names)
        counts = np.zeros((n, n), dtype=np.int64)
        for t, p in zip(true_labels, predicted_labels, strict=True):
            counts[t, p] += 1
        return cls(counts, list(class_names))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def weighted_accuracy(cm: ConfusionMatrix) -> float:
    """Overall accuracy: trace / total count."""
    total = cm.total
    if total == 0:
        raise DataError("empty confusion matrix")
    return float(np.trace(cm.counts)) / total


def unweighted_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall over classes with nonzero support."""
    support = cm.support()
    present = support > 0
    if not present.any():
        raise DataError("confusion matrix has no populated classes")
    recalls = np.diag(cm.counts)[present] / support[present]
    return float(recalls.mean())


def per_class_stats(cm: ConfusionMatrix) -> list[dict[str, float]]:
    """Precision/recall/F1 per class; degenerate classes report 0.0."""
    support = cm.support()
    predicted = cm.counts.sum(axis=0)
    stats = []
    for i in range(len(cm.class_names)):
        tp = float(cm.counts[i, i])
        precision = tp / predicted[i] if predicted[i] > 0 else 0.0
        recall = tp / support[i] if support[i] > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        stats.append({"precision": precision, "recall": recall, "f1": f1})
    return stats


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1 over classes with nonzero support."""
    support = cm.support()
    if not (support > 0).any():
        raise DataError("confusion matrix has no populated classes")
    stats = per_class_stats(cm)
    values = [stats[i]["f1"] for i in range(len(stats)) if support[i] > 0]
    return float(np.mean(values))


@dataclass
class FoldReport:
    fold_id: int
    confusion: ConfusionMatrix
    wa: float
    ua: float
    macro_f1: float
    per_class: list[dict[str, float]]


def fold_report(fold_id: int, cm: ConfusionMatrix) -> FoldReport:
    return FoldReport(
        fold_id=fold_id,
        confusion=cm,
        wa=weighted_accuracy(cm),
        ua=unweighted_accuracy(cm),
        macro_f1=macro_f1(cm),
        per_class=per_class_stats(cm),
    )


@dataclass
class AggregateReport:
    """Mean and sample standard deviation of each metric across folds."""

    fold_count: int
    wa_mean: float
    wa_std: float
    ua_mean: float
    ua_std: float
    f1_mean: float
    f1_std: float


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), std


def aggregate_reports(reports: list[FoldReport]) -> AggregateReport:
    if not reports:
        raise DataError("no fold reports to aggregate")
    wa_mean, wa_std = _mean_std([r.wa for r in reports])
    ua_mean, ua_std = _mean_std([r.ua for r in reports])
    f1_mean, f1_std = _mean_std([r.macro_f1 for r in reports])
    return AggregateReport(len(reports), wa_mean, wa_std, ua_mean, ua_std, f1_mean, f1_std)


def format_mean_std(mean: float, std: float) -> str:
    """Render a rate pair on the percentage scale, e.g. '89.19 ± 2.65'."""
    return f"{100.0 * mean:.2f} ± {100.0 * std:.2f}"


def _write_csv(path: Path, rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def emit_report(
    reports: list[FoldReport],
    aggregate: AggregateReport,
    config: dict,
    out_dir,
    reference=None,
) -> list[Path]:
    """Write metrics.csv, per-fold confusion CSVs, and summary.txt.

    Output is byte-deterministic for identical inputs. ``reference``, when
    given, adds a published-results column to the summary.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    metrics_path = out_dir / "metrics.csv"
    rows: list[list] = [["fold", "wa", "ua", "macro_f1"]]
    for r in reports:
        rows.append([r.fold_id, repr(r.wa), repr(r.ua), repr(r.macro_f1)])
    rows.append(["mean", repr(aggregate.wa_mean), repr(aggregate.ua_mean), repr(aggregate.f1_mean)])
    rows.append(["std", repr(aggregate.wa_std), repr(aggregate.ua_std), repr(aggregate.f1_std)])
    _write_csv(metrics_path, rows)
    written.append(metrics_path)

    for r in reports:
        cm_path = out_dir / f"confusion_fold{r.fold_id}.csv"
        cm_rows: list[list] = [["true\\pred"] + list(r.confusion.class_names)]
        for i, name in enumerate(r.confusion.class_names):
            cm_rows.append([name] + [int(v) for v in r.confusion.counts[i]])
        _write_csv(cm_path, cm_rows)
        written.append(cm_path)

    lines = []
    lines.append(" ".join(f"{k}={config[k]}" for k in sorted(config)))
    lines.append("")
    header = f"{'metric':<8}{'mean ± std':<18}"
    if reference is not None:
        header += "published"
    lines.append(header)
    pairs = [
        ("WA", aggregate.wa_mean, aggregate.wa_std, getattr(reference, "wa", None), getattr(reference, "wa_std", None)),
        ("UA", aggregate.ua_mean, aggregate.ua_std, getattr(reference, "ua", None), getattr(reference, "ua_std", None)),
        ("F1", aggregate.f1_mean, aggregate.f1_std, getattr(reference, "f1", None), getattr(reference, "f1_std", None)),
    ]
    for name, mean, std, ref_mean, ref_std in pairs:
        line = f"{name:<8}{format_mean_std(mean, std):<18}"
        if ref_mean is not None:
            line += f"{ref_mean:.2f} ± {ref_std:.2f}"
        lines.append(line.rstrip())
    summary_path = out_dir / "summary.txt"
    summary_path.write_text("\n".join(lines) + "\n")
    written.append(summary_path)
    return written
