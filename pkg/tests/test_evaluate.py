import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodulescan.detect import DetectionResult
from nodulescan.errors import ConfigError, EmptyResults, UndefinedMetric
from nodulescan.evaluate import (
    build_report,
    precision_recall,
    render_report_plots,
    size_accuracy,
    write_report_csv,
)


def det(predicted: int) -> DetectionResult:
    scores = {b: 1.0 for b in range(6)}
    scores[predicted] = 0.0
    return DetectionResult(
        predicted_b=predicted,
        scores=scores,
        alignments={b: 1 for b in range(6)},
        presence=predicted >= 1,
    )


class TestPrecisionRecall:
    def test_precision_from_known_counts(self):
        precision, _ = precision_recall(tp=15, fp=11, fn=5)
        assert abs(precision * 100 - 57.7) <= 0.1

    def test_recall_from_known_counts(self):
        _, recall = precision_recall(tp=15, fp=11, fn=5)
        assert recall == 0.75

    def test_perfect_detector(self):
        assert precision_recall(tp=20, fp=0, fn=0) == (1.0, 1.0)

    def test_undefined_when_no_positive_predictions(self):
        with pytest.raises(UndefinedMetric):
            precision_recall(tp=0, fp=0, fn=5)

    def test_undefined_when_no_positive_truth(self):
        with pytest.raises(UndefinedMetric):
            precision_recall(tp=0, fp=3, fn=0)

    def test_negative_counts_rejected(self):
        with pytest.raises(ConfigError):
            precision_recall(tp=-1, fp=0, fn=0)


class TestSizeAccuracy:
    def test_diagonal_confusion_is_perfect(self):
        confusion = np.eye(6, dtype=int) * 20
        assert size_accuracy(confusion, 0) == {2: 1.0, 3: 1.0, 4: 1.0, 5: 1.0}

    def test_exact_rates_from_mixed_confusion(self):
        confusion = np.zeros((6, 6), dtype=int)
        # 20 traces per class; off-diagonal mass goes to the neighbour
        confusion[2, 2], confusion[2, 1] = 6, 14  # 30%
        confusion[3, 3], confusion[3, 2] = 11, 9  # 55%
        confusion[4, 4], confusion[4, 3] = 14, 6  # 70%
        confusion[5, 5], confusion[5, 4] = 3, 17  # 15%
        acc = size_accuracy(confusion, 0)
        assert acc == {2: 0.30, 3: 0.55, 4: 0.70, 5: 0.15}

    def test_five_mm_tolerance_set_is_four_and_five(self):
        confusion = np.zeros((6, 6), dtype=int)
        confusion[5, 4] = 20  # everything called one size small
        acc = size_accuracy(confusion, 1)
        assert acc[5] == 1.0
        assert size_accuracy(confusion, 0)[5] == 0.0
        confusion[5, 4], confusion[5, 3] = 0, 20  # two sizes small: outside tolerance
        assert size_accuracy(confusion, 1)[5] == 0.0

    def test_empty_row_reports_absent(self):
        confusion = np.zeros((6, 6), dtype=int)
        assert size_accuracy(confusion, 0)[3] is None

    def test_bad_tolerance_rejected(self):
        with pytest.raises(ConfigError):
            size_accuracy(np.zeros((6, 6), dtype=int), 2)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=200
        )
    )
    def test_tolerance_only_helps(self, pairs):
        confusion = np.zeros((6, 6), dtype=int)
        for true_b, pred in pairs:
            confusion[true_b, pred] += 1
        exact = size_accuracy(confusion, 0)
        tol1 = size_accuracy(confusion, 1)
        for b in (2, 3, 4, 5):
            if exact[b] is not None:
                assert tol1[b] >= exact[b]


class TestBuildReport:
    def test_perfect_detector_gives_scaled_identity(self):
        results = [(b, det(b)) for b in range(6) for _ in range(20)]
        report = build_report(results)
        np.testing.assert_array_equal(report.confusion, np.eye(6, dtype=int) * 20)
        for b in range(1, 6):
            assert report.per_size_precision[b] == 1.0
            assert report.per_size_recall[b] == 1.0
        assert report.negatives_breakdown == {}

    def test_single_missed_nodule_breakdown(self):
        report = build_report([(1, det(0))])
        assert report.negatives_breakdown == {1: 1}
        assert report.per_size_recall[1] == 0.0

    def test_rates_match_confusion_identities(self, rng):
        results = [
            (int(rng.integers(0, 6)), det(int(rng.integers(0, 6)))) for _ in range(300)
        ]
        report = build_report(results)
        conf = report.confusion
        assert conf.sum() == 300
        for b in range(1, 6):
            row = conf[b].sum()
            col = conf[:, b].sum()
            if row:
                assert report.per_size_recall[b] == pytest.approx(conf[b, 1:].sum() / row)
            if col:
                assert report.per_size_precision[b] == pytest.approx(conf[1:, b].sum() / col)
        negative_calls = sum(report.negatives_breakdown.values())
        assert negative_calls == conf[1:, 0].sum()

    def test_row_sums_equal_trace_counts(self):
        results = [(2, det(2))] * 7 + [(4, det(3))] * 5
        report = build_report(results)
        assert report.confusion[2].sum() == 7
        assert report.confusion[4].sum() == 5

    def test_empty_results_rejected(self):
        with pytest.raises(EmptyResults):
            build_report([])


class TestReportOutputs:
    @pytest.fixture
    def report(self):
        results = [(b, det(b)) for b in range(6) for _ in range(4)]
        results.append((1, det(0)))
        return build_report(results)

    def test_csv_has_three_decimal_rates(self, tmp_path, report):
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "metric,b,value"
        precision_1 = next(ln for ln in lines if ln.startswith("precision,1,"))
        assert precision_1 == "precision,1,1.000"
        recall_1 = next(ln for ln in lines if ln.startswith("recall,1,"))
        assert recall_1 == "recall,1,0.800"

    def test_absent_rates_have_empty_value(self, tmp_path):
        report = build_report([(0, det(0))])
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        assert "recall,3,\n" in path.read_text() or "recall,3," in path.read_text()

    def test_plots_are_written_as_svg(self, tmp_path, report):
        written = render_report_plots(report, tmp_path / "plots")
        assert sorted(written) == [
            "negatives_breakdown.svg",
            "precision_recall.svg",
            "size_accuracy.svg",
        ]
        for name in written:
            body = (tmp_path / "plots" / name).read_text()
            assert body.lstrip().startswith("<?xml")

    def test_report_json_dict_is_serializable(self, report):
        import json

        payload = json.dumps(report.to_json_dict(), sort_keys=True)
        assert '"confusion"' in payload
