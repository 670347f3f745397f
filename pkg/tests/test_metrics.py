import numpy as np
import pytest

from attnbalance.bench import EvalReport, PredictionRecord, compute_metrics, macro_average
from attnbalance.bench.metrics import report_row
from attnbalance.errors import DimensionError, InvariantError

from oracles import metrics_reference

Y, N = "yes", "no"


def preds_from(answers):
    text = {"yes": "Yes.", "no": "No.", "unparseable": "Hard to say."}
    return [PredictionRecord(instance_id=f"i{i}", raw_text=text[a]) for i, a in enumerate(answers)]


class TestComputeMetrics:
    def test_hand_confusion_case(self):
        report = compute_metrics(preds_from([Y, N, N, Y]), [Y, Y, N, N])
        assert (report.tp, report.fn, report.tn, report.fp) == (1, 1, 1, 1)
        for metric in ("accuracy", "precision", "recall", "f1", "yes_ratio"):
            assert getattr(report, metric) == pytest.approx(50.0)

    def test_perfect_predictions(self):
        gold = [Y, N, Y, N]
        report = compute_metrics(preds_from(gold), gold)
        assert report.accuracy == pytest.approx(100.0)
        assert report.f1 == pytest.approx(100.0)
        assert report.undefined == ()

    def test_always_yes_responder(self):
        report = compute_metrics(preds_from([Y, Y, Y, Y]), [Y, Y, N, N])
        assert report.recall == pytest.approx(100.0)
        assert report.yes_ratio == pytest.approx(100.0)
        assert report.accuracy == pytest.approx(50.0)

    def test_unparseable_scoring(self):
        # unparseable vs gold yes -> fn; vs gold no -> neither tn nor fp
        report = compute_metrics(preds_from(["unparseable", "unparseable"]), [Y, N])
        assert report.fn == 1
        assert report.tp == report.fp == report.tn == 0
        assert report.unparseable == 2
        assert report.accuracy == pytest.approx(0.0)
        assert report.yes_ratio == pytest.approx(0.0)

    def test_division_by_zero_sentinels(self):
        report = compute_metrics(preds_from([N, N]), [N, N])
        assert report.precision == 0.0
        assert report.recall == 0.0
        assert report.f1 == 0.0
        assert set(report.undefined) == {"precision", "recall", "f1"}
        assert report.accuracy == pytest.approx(100.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            compute_metrics(preds_from([Y]), [Y, N])

    def test_matches_reference_on_seeded_sets(self):
        rng = np.random.default_rng(77)
        options = [Y, N, "unparseable"]
        for _ in range(100):
            size = int(rng.integers(1, 60))
            answers = [options[i] for i in rng.choice(3, size=size, p=[0.45, 0.45, 0.1])]
            gold = [options[i] for i in rng.choice(2, size=size)]
            report = compute_metrics(preds_from(answers), gold)
            want = metrics_reference(answers, gold)
            assert (report.tp, report.fp, report.tn, report.fn) == (
                want["tp"], want["fp"], want["tn"], want["fn"],
            )
            for metric in ("accuracy", "precision", "recall", "f1", "yes_ratio"):
                assert getattr(report, metric) == pytest.approx(want[metric], abs=1e-12)

    def test_f1_is_harmonic_mean_when_defined(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            size = int(rng.integers(4, 40))
            answers = [(Y if v else N) for v in rng.integers(0, 2, size=size)]
            gold = [(Y if v else N) for v in rng.integers(0, 2, size=size)]
            report = compute_metrics(preds_from(answers), gold)
            if "precision" in report.undefined or "recall" in report.undefined:
                continue
            if report.precision + report.recall == 0:
                continue
            harmonic = 2 * report.precision * report.recall / (report.precision + report.recall)
            assert report.f1 == pytest.approx(harmonic, abs=1e-12)

    def test_yes_ratio_identity(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            size = int(rng.integers(1, 30))
            answers = [(Y if v else N) for v in rng.integers(0, 2, size=size)]
            gold = [(Y if v else N) for v in rng.integers(0, 2, size=size)]
            report = compute_metrics(preds_from(answers), gold)
            assert report.yes_ratio == pytest.approx(100.0 * (report.tp + report.fp) / report.total)


class TestPredictionRecord:
    def test_parsed_autofilled(self):
        rec = PredictionRecord(instance_id="a", raw_text="Yes, clearly.")
        assert rec.parsed == "yes"

    def test_inconsistent_parse_rejected(self):
        with pytest.raises(InvariantError):
            PredictionRecord(instance_id="a", raw_text="Yes.", parsed="no")


class TestReportRows:
    def test_two_decimal_serialization(self):
        report = compute_metrics(preds_from([Y, N, N]), [Y, Y, N])
        row = report_row("demo", report)
        assert row["accuracy"] == round(100 * 2 / 3, 2) == 66.67
        assert row["name"] == "demo"

    def test_macro_average(self):
        r1 = compute_metrics(preds_from([Y, N]), [Y, N])
        r2 = compute_metrics(preds_from([Y, Y]), [Y, N])
        avg = macro_average([r1, r2])
        assert avg.accuracy == pytest.approx((r1.accuracy + r2.accuracy) / 2)
        assert avg.total == 4
        assert avg.tp == r1.tp + r2.tp
