"""Metric units, aggregation, and report emission."""

import numpy as np
import pytest

from poolprobe import metrics as mx
from poolprobe.errors import DataError
from poolprobe.published import external_baseline, published_reference


def cm(counts, names=None):
    counts = np.asarray(counts)
    names = names or [f"c{i}" for i in range(counts.shape[0])]
    return mx.ConfusionMatrix(counts, names)


class TestWeightedAccuracy:
    def test_diagonal_is_one(self):
        assert mx.weighted_accuracy(cm([[3, 0], [0, 2]])) == 1.0

    def test_hand_value(self):
        assert mx.weighted_accuracy(cm([[3, 1], [1, 1]])) == pytest.approx(4 / 6)

    def test_equal_supports_match_ua(self):
        matrix = cm([[3, 1], [2, 2]])  # both rows sum to 4
        assert mx.weighted_accuracy(matrix) == pytest.approx(mx.unweighted_accuracy(matrix))

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            mx.weighted_accuracy(cm([[0, 0], [0, 0]]))


class TestUnweightedAccuracy:
    def test_diagonal_is_one(self):
        assert mx.unweighted_accuracy(cm([[5, 0], [0, 1]])) == 1.0

    def test_hand_value(self):
        assert mx.unweighted_accuracy(cm([[3, 1], [1, 1]])) == pytest.approx(0.625)

    def test_permutation_invariant(self):
        counts = np.array([[5, 1, 0], [2, 6, 1], [0, 0, 4]])
        base = mx.unweighted_accuracy(cm(counts))
        perm = [2, 0, 1]
        permuted = counts[np.ix_(perm, perm)]
        assert mx.unweighted_accuracy(cm(permuted)) == pytest.approx(base)

    def test_zero_support_class_excluded(self):
        # class 2 never occurs; UA averages the two populated classes
        value = mx.unweighted_accuracy(cm([[3, 1, 0], [1, 1, 0], [0, 0, 0]]))
        assert value == pytest.approx(0.625)


class TestMacroF1:
    def test_diagonal_is_one(self):
        assert mx.macro_f1(cm([[2, 0], [0, 7]])) == 1.0

    def test_hand_value(self):
        assert mx.macro_f1(cm([[3, 1], [1, 1]])) == pytest.approx(0.625)

    def test_degenerate_class_reports_zero_per_class(self):
        matrix = cm([[3, 1, 0], [1, 1, 0], [0, 0, 0]])
        stats = mx.per_class_stats(matrix)
        assert stats[2] == {"precision": 0.0, "recall": 0.0, "f1": 0.0}
        # zero-support class drops out of the macro average
        assert mx.macro_f1(matrix) == pytest.approx(0.625)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            counts = rng.integers(0, 10, size=(3, 3))
            if counts.sum() == 0 or (counts.sum(axis=1) > 0).sum() == 0:
                continue
            matrix = cm(counts)
            for value in (
                mx.weighted_accuracy(matrix),
                mx.unweighted_accuracy(matrix),
                mx.macro_f1(matrix),
            ):
                assert 0.0 <= value <= 1.0


class TestFromPairs:
    def test_matches_direct_metrics(self):
        rng = np.random.default_rng(1)
        true = rng.integers(0, 3, size=100)
        pred = rng.integers(0, 3, size=100)
        matrix = mx.ConfusionMatrix.from_pairs(true, pred, ["a", "b", "c"])
        assert matrix.total == 100
        assert mx.weighted_accuracy(matrix) == pytest.approx(np.mean(true == pred))
        recalls = [np.mean(pred[true == c] == c) for c in range(3) if (true == c).any()]
        assert mx.unweighted_accuracy(matrix) == pytest.approx(np.mean(recalls))


class TestAggregation:
    def test_mean_and_sample_std(self):
        reports = [
            mx.fold_report(i, cm([[8, 2], [2, 8 + i]])) for i in range(4)
        ]
        agg = mx.aggregate_reports(reports)
        wa = [r.wa for r in reports]
        assert agg.wa_mean == pytest.approx(np.mean(wa))
        assert agg.wa_std == pytest.approx(np.std(wa, ddof=1))
        assert agg.fold_count == 4

    def test_single_fold_std_is_zero(self):
        agg = mx.aggregate_reports([mx.fold_report(0, cm([[3, 1], [1, 1]]))])
        assert agg.wa_std == 0.0
        assert agg.ua_std == 0.0

    def test_formatting(self):
        assert mx.format_mean_std(0.8919, 0.0265) == "89.19 ± 2.65"
        assert mx.format_mean_std(0.5, 0.0) == "50.00 ± 0.00"


class TestEmitReport:
    def build(self, tmp_path, sub):
        reports = [mx.fold_report(i, cm([[6, 1], [2, 5 + i]], ["pos", "neg"])) for i in range(2)]
        agg = mx.aggregate_reports(reports)
        out = tmp_path / sub
        paths = mx.emit_report(reports, agg, {"pooling": "qkv", "seed": 0}, out)
        return out, paths

    def test_files_written(self, tmp_path):
        out, paths = self.build(tmp_path, "run")
        assert (out / "metrics.csv").exists()
        assert (out / "confusion_fold0.csv").exists()
        assert (out / "confusion_fold1.csv").exists()
        assert (out / "summary.txt").exists()
        text = (out / "metrics.csv").read_text()
        assert text.startswith("fold,wa,ua,macro_f1\n")
        assert "\r" not in text

    def test_reemission_byte_identical(self, tmp_path):
        out_a, _ = self.build(tmp_path, "a")
        out_b, _ = self.build(tmp_path, "b")
        for name in ("metrics.csv", "confusion_fold0.csv", "summary.txt"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_summary_contains_mean_std(self, tmp_path):
        out, _ = self.build(tmp_path, "run")
        summary = (out / "summary.txt").read_text()
        assert "±" in summary
        assert "WA" in summary and "UA" in summary and "F1" in summary

    def test_reference_column(self, tmp_path):
        reports = [mx.fold_report(0, cm([[6, 1], [2, 5]], ["pos", "neg"]))]
        agg = mx.aggregate_reports(reports)
        ref = published_reference("shemo", "small", "qkv")
        mx.emit_report(reports, agg, {"seed": 0}, tmp_path / "ref", reference=ref)
        summary = (tmp_path / "ref" / "summary.txt").read_text()
        assert "89.19 ± 2.65" in summary


class TestPublishedLookup:
    def test_headline_values(self):
        ref = published_reference("shemo", "small", "qkv")
        assert (ref.wa, ref.ua) == (89.19, 83.07)
        assert ref.f1 is None
        ref = published_reference("iemocap", "tiny", "mean")
        assert (ref.wa, ref.ua) == (68.22, 68.53)

    def test_layered_values_include_f1(self):
        ref = published_reference("shemo", "small", "attentive", layer=8)
        assert (ref.wa, ref.ua, ref.f1) == (88.94, 82.86, 88.79)

    def test_layer_counts(self):
        for layer in range(1, 5):
            published_reference("shemo", "tiny", "qkv", layer=layer)
        for layer in range(1, 13):
            published_reference("iemocap", "small", "attentive", layer=layer)
        with pytest.raises(KeyError):
            published_reference("shemo", "tiny", "qkv", layer=5)

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            published_reference("shemo", "large", "qkv")

    def test_external_baselines(self):
        assert external_baseline("shemo", "whisper-large-v3") == (89.55, 80.23)
        assert external_baseline("iemocap", "hubert-xlarge-alt") == (74.24, 74.57)
        with pytest.raises(KeyError):
            external_baseline("shemo", "unknown-system")
