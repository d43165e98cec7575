import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from evshield.data import fit_scaler, scale
from evshield.metrics import (
    DetectionReport,
    ForecastReport,
    MetricsError,
    detection_from_counts,
    detection_metrics,
    forecast_metrics,
    inverse_scale_predictions,
    median_defined,
    pooled_detection,
    recovery_percentage,
)
from evshield.data import ScalerParams
from reference import reference_confusion, reference_forecast_metrics


class TestForecast:
    def test_perfect(self, rng):
        t = rng.random(10)
        r = forecast_metrics(t, t)
        assert (r.mae, r.rmse, r.r2) == (0.0, 0.0, 1.0)

    def test_arithmetic(self):
        r = forecast_metrics([0.0, 0.0], [1.0, -1.0])
        assert (r.mae, r.rmse, r.r2) == (1.0, 1.0, 0.0)

    def test_constant_targets_leave_r2_undefined(self):
        r = forecast_metrics([1.0, 2.0], [3.0, 3.0])
        assert r.r2 is None and r.rmse > 0

    def test_errors(self):
        with pytest.raises(MetricsError):
            forecast_metrics([], [])
        with pytest.raises(MetricsError):
            forecast_metrics([1.0], [1.0, 2.0])

    def test_invariants_enforced(self):
        with pytest.raises(MetricsError):
            ForecastReport(2.0, 1.0, 0.5, 3)
        with pytest.raises(MetricsError):
            ForecastReport(1.0, 1.0, 1.5, 3)

    def test_random_instances_match_formula(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 50))
            t = rng.normal(size=n) * rng.uniform(0.1, 100)
            p = t + rng.normal(size=n)
            r = forecast_metrics(p, t)
            mae, rmse, r2 = reference_forecast_metrics(p.tolist(), t.tolist())
            assert abs(r.mae - mae) <= 1e-10 * max(1, mae)
            assert abs(r.rmse - rmse) <= 1e-10 * max(1, rmse)
            assert abs(r.r2 - r2) <= 1e-10 * max(1, abs(r2))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 40).flatmap(lambda n: st.tuples(
        hnp.arrays(np.float64, n, elements=st.floats(-1e6, 1e6)),
        hnp.arrays(np.float64, n, elements=st.floats(-1e6, 1e6)))))
    def test_mae_never_exceeds_rmse(self, pair):
        p, t = pair
        r = forecast_metrics(p, t)
        assert r.mae <= r.rmse * (1 + 1e-12)
        assert r.r2 is None or r.r2 <= 1.0

    def test_permutation_equivariant(self, rng):
        p, t = rng.random(30), rng.random(30)
        perm = rng.permutation(30)
        a, b = forecast_metrics(p, t), forecast_metrics(p[perm], t[perm])
        assert a.mae == pytest.approx(b.mae, rel=1e-14)
        assert a.rmse == pytest.approx(b.rmse, rel=1e-14)
        assert a.r2 == pytest.approx(b.r2, rel=1e-12)


class TestDetection:
    def test_perfect_detection(self):
        m = np.array([1, 0, 1, 1, 0], bool)
        r = detection_metrics(m, m)
        assert (r.precision, r.recall, r.fpr) == (1.0, 1.0, 0.0)

    def test_single_false_alarm(self):
        pred = np.zeros(100, bool)
        pred[10] = True
        r = detection_metrics(pred, np.zeros(100, bool))
        # one normal step flagged out of 100 normal steps
        assert r.fpr == 0.01
        assert r.precision == 0.0
        assert r.recall is None and r.f1 is None

    def test_span_and_counts(self):
        pred = np.array([1, 1, 0, 0, 1, 0], bool)
        truth = np.array([1, 0, 0, 1, 1, 0], bool)
        r = detection_metrics(pred, truth, slice(2, 6))
        assert (r.tp, r.fp, r.tn, r.fn) == (1, 0, 2, 1)
        assert r.evaluated == 4
        with pytest.raises(MetricsError, match="empty"):
            detection_metrics(pred, truth, slice(3, 3))
        with pytest.raises(MetricsError):
            detection_metrics(pred, truth[:5])

    def test_randomized_against_counting(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 80))
            pred = rng.random(n) < rng.random()
            truth = rng.random(n) < rng.random()
            got = detection_metrics(pred, truth)
            want = reference_confusion(pred.tolist(), truth.tolist())
            fields = (got.tp, got.fp, got.tn, got.fn, got.precision, got.recall, got.f1, got.fpr)
            for g, w in zip(fields, want):
                assert (g is None and w is None) or abs(g - w) <= 1e-10
            for v in fields[4:]:
                assert v is None or 0.0 <= v <= 1.0
            assert got.true_attacks_detected == got.recall

    def test_zero_precision_and_recall(self):
        r = detection_from_counts(0, 3, 5, 2)
        assert r.f1 == 0.0

    def test_pooled(self):
        a = detection_from_counts(1, 2, 3, 4)
        b = detection_from_counts(5, 0, 7, 1)
        assert pooled_detection([a, b]) == detection_from_counts(6, 2, 10, 5)

    def test_report_dict(self):
        d = detection_from_counts(2, 1, 6, 1).to_dict()
        assert d["true_attacks_detected"] == d["recall"] == 2 / 3
        d.pop("true_attacks_detected")
        assert DetectionReport(**d) == detection_from_counts(2, 1, 6, 1)


class TestUnits:
    def test_identity_scaler(self, rng):
        p, t = rng.random(5), rng.random(5)
        pp, tt = inverse_scale_predictions(p, t, ScalerParams(0.0, 1.0))
        assert np.array_equal(pp, p) and np.array_equal(tt, t)

    def test_two_paths_agree(self, rng):
        raw_t = rng.uniform(10, 90, 40)
        raw_p = raw_t + rng.normal(0, 3, 40)
        s = fit_scaler(raw_t, client_id="c")
        pp, tt = inverse_scale_predictions(scale(s, raw_p), scale(s, raw_t), s, "c")
        assert np.max(np.abs(tt - raw_t)) < 1e-12
        direct, via = forecast_metrics(raw_p, raw_t), forecast_metrics(pp, tt)
        assert via.mae == pytest.approx(direct.mae, rel=1e-10)
        assert via.r2 == pytest.approx(direct.r2, rel=1e-10)

    def test_client_mismatch(self):
        with pytest.raises(MetricsError, match="client"):
            inverse_scale_predictions([0.5], [0.5], ScalerParams(0, 1, "a"), "b")


def test_median_defined():
    assert median_defined([None, 1.0, float("nan"), 3.0]) == 2.0
    assert median_defined([None]) is None


def test_recovery_percentage():
    assert recovery_percentage(0.9, 0.8, 0.85) == pytest.approx(50.0)
    assert recovery_percentage(0.9, 0.9, 0.85) is None
    assert recovery_percentage(None, 0.8, 0.85) is None
