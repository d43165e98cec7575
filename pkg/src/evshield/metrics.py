"""Forecast regression metrics and detection confusion-matrix metrics.

Undefined quantities (R^2 of constant targets, precision with no positive
predictions, ...) are reported as ``None`` rather than as a number.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import inverse_scale


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ForecastReport:
    mae: float
    rmse: float
    r2: float | None
    n: int
    scale_domain: str = "original"

    def __post_init__(self):
        # one ulp of slack: equal |e| can round mean|e| just above sqrt(mean e^2)
        if self.mae > self.rmse * (1 + 1e-12):
            raise MetricsError(f"MAE {self.mae} exceeds RMSE {self.rmse}")
        if self.r2 is not None and self.r2 > 1.0:
            raise MetricsError(f"R^2 {self.r2} above 1")

    def to_dict(self):
        return asdict(self)


def forecast_metrics(predictions, targets, scale_domain="original"):
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise MetricsError(f"predictions ({p.size}) and targets ({t.size}) are not aligned")
    if p.size == 0:
        raise MetricsError("no forecasts to score")
    e = p - t
    a = np.abs(e)
    mae = float(np.mean(a))
    # scale by the largest error so e**2 can neither underflow nor overflow
    peak = float(a.max())
    rmse = 0.0 if peak == 0.0 else peak * float(np.sqrt(np.mean((a / peak) ** 2)))
    sst = float(np.sum((t - t.mean()) ** 2))
    r2 = None if sst == 0.0 else 1.0 - float(np.sum(e * e)) / sst
    return ForecastReport(mae, rmse, r2, int(p.size), scale_domain)


@dataclass(frozen=True)
class DetectionReport:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float | None
    recall: float | None
    f1: float | None
    fpr: float | None

    @property
    def evaluated(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def true_attacks_detected(self):
        # Taken to be recall over the evaluation span.
        return self.recall

    def to_dict(self):
        d = asdict(self)
        d["true_attacks_detected"] = self.true_attacks_detected
        return d


def _ratio(num, den):
    return None if den == 0 else num / den


def detection_from_counts(tp, fp, tn, fn):
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return DetectionReport(tp, fp, tn, fn, precision, recall, f1, _ratio(fp, fp + tn))


def detection_metrics(predicted, truth, span=None):
    """Confusion counts over ``span`` (a slice, index array or boolean mask;
    default: everything)."""
    pr = np.asarray(predicted, dtype=bool)
    tr = np.asarray(truth, dtype=bool)
    if pr.shape != tr.shape:
        raise MetricsError(f"masks not aligned: {pr.shape} vs {tr.shape}")
    if span is not None:
        pr, tr = pr[span], tr[span]
    if pr.size == 0:
        raise MetricsError("evaluation span is empty")
    tp = int(np.sum(pr & tr))
    fp = int(np.sum(pr & ~tr))
    fn = int(np.sum(~pr & tr))
    tn = int(np.sum(~pr & ~tr))
    return detection_from_counts(tp, fp, tn, fn)


def pooled_detection(reports):
    """Overall report from summed confusion counts."""
    reports = list(reports)
    return detection_from_counts(
        sum(r.tp for r in reports), sum(r.fp for r in reports),
        sum(r.tn for r in reports), sum(r.fn for r in reports),
    )


def inverse_scale_predictions(predictions, targets, scaler, client_id=None):
    """Map scaled predictions and targets back to original units."""
    if client_id is not None and scaler.client_id is not None and scaler.client_id != client_id:
        raise MetricsError(f"scaler fitted for client {scaler.client_id!r} used on {client_id!r}")
    return inverse_scale(scaler, predictions), inverse_scale(scaler, targets)


def median_defined(values):
    """Median over the defined (non-None, non-NaN) entries, or None."""
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return float(np.median(vals)) if vals else None


def recovery_percentage(clean, attacked, filtered):
    """Share of the clean-to-attacked loss won back by filtering, in percent."""
    if None in (clean, attacked, filtered) or clean == attacked:
        return None
    return 100.0 * (filtered - attacked) / (clean - attacked)
