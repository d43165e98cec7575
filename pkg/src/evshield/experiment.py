"""End-to-end pipeline: per-client scenarios, the four training arms, reports.

Pipeline per client::

    clean -> attack -> detector (fit on normal training windows) -> flags
          -> filter -> per-scenario scaling -> split -> windows

Every arm is scored against the clean test targets in original units, so the
arms differ only in what they were trained on and how.
"""
import csv
import io
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from datetime import timedelta
from pathlib import Path

import numpy as np

from . import attack as attack_mod
from . import detector as det
from .data import (
    TimeSeries,
    fit_scaler,
    generate_synthetic,
    load_csv,
    make_test_windows,
    make_windows,
    read_flag_column,
    scale,
    ScalerParams,
    SyntheticProfile,
    split_index,
    write_csv,
)
from .fed import ClientState, centralized_train, initial_params, run_federation
from .filtering import AnomalySegment, export_filtered, filter_anomalies
from .metrics import (
    DetectionReport,
    ForecastReport,
    detection_metrics,
    forecast_metrics,
    inverse_scale_predictions,
    pooled_detection,
    recovery_percentage,
)
from .nncore import ModelParameters
from .seeding import derive_int, derive_rng

logger = logging.getLogger(__name__)

ARMS = (
    ("fed_clean", "federated", "clean"),
    ("fed_attacked", "federated", "attacked"),
    ("fed_filtered", "federated", "filtered"),
    ("central_filtered", "centralized", "filtered"),
)


class PipelineError(RuntimeError):
    """A stage failed for one client; carries both names for the report."""

    def __init__(self, stage, client_id, cause):
        super().__init__(f"stage {stage!r} failed for client {client_id!r}: {cause}")
        self.stage = stage
        self.client_id = client_id


class OutputError(OSError):
    pass


# --------------------------------------------------------------------------- scenarios


@dataclass(eq=False)
class ClientScenario:
    client_id: str
    clean: TimeSeries
    attacked: TimeSeries
    filtered: TimeSeries
    truth_mask: np.ndarray
    predicted_mask: np.ndarray
    window_scores: np.ndarray | None
    segments: list
    calibration: det.DetectorCalibration | None
    scalers: dict
    split: int
    window_length: int
    detector_params: ModelParameters | None = None
    detector_history: dict = field(default_factory=dict)

    def series(self, scenario):
        return getattr(self, scenario)

    def datasets(self, scenario):
        """(train, test) windows of one scenario, scaled with its own scaler."""
        scaled = scale(self.scalers[scenario], self.series(scenario).values)
        k, L = self.split, self.window_length
        return make_windows(scaled[:k], L), make_test_windows(scaled[:k], scaled[k:], L)

    def test_targets(self):
        """Clean test values in original units: the common yardstick of every arm."""
        return self.clean.values[self.split:]

    def test_timestamps(self):
        return self.clean.timestamps()[self.split:]


@dataclass(eq=False)
class ScenarioBundle:
    clients: dict  # client id -> ClientScenario, sorted by id
    seconds: float = 0.0

    def __iter__(self):
        return iter(self.clients.values())

    def __len__(self):
        return len(self.clients)


def load_client_series(client, config):
    if client.csv is not None:
        return load_csv(client.csv, client_id=client.id)
    profile = dict(client.synthetic)
    profile.setdefault("seed", derive_int(config.seed, "data", client.id))
    return generate_synthetic(SyntheticProfile(client_id=client.id, **profile))


def _fit_scalers(client_id, series_by_name, split, mode):
    out = {}
    for name, s in series_by_name.items():
        fit_on = s.values if mode == "full-range" else s.values[:split]
        out[name] = fit_scaler(fit_on, client_id=client_id)
    return out


def _window_any(mask, L):
    return np.lib.stride_tricks.sliding_window_view(mask, L).any(axis=1)


def _run_detector(client_id, clean, attacked, truth, split, config):
    """Fit the autoencoder on attack-free training windows and flag the whole series."""
    settings = config.detector
    ae = settings.autoencoder
    L = ae.window_length
    n = len(attacked)
    if not settings.enabled:
        return np.zeros(n, dtype=bool), None, None, None, {}
    det_scaler = fit_scaler(clean.values[:split], client_id=client_id)
    scaled = scale(det_scaler, attacked.values)
    train_windows = det.sliding_windows(scaled[:split], L)
    normal = train_windows[~_window_any(truth[:split], L)]
    params, report = det.train_autoencoder(normal, ae, derive_rng(config.seed, "detector", client_id))
    calibration = det.calibrate_threshold(det.reconstruction_errors(params, normal, ae), settings.percentile)
    mask, scores = det.flag_anomalies(params, calibration, scaled, ae, settings.mapping)
    history = {
        "train_loss": report.train_loss,
        "val_loss": report.val_loss,
        "best_epoch": report.best_epoch,
        "stopped_early": report.stopped_early,
        "normal_windows": int(len(normal)),
        "scaler": {"min": det_scaler.min, "max": det_scaler.max},
    }
    return mask, scores, calibration, params, history


def build_client(client, config):
    cid = client.id
    stage = "load"
    try:
        clean = load_client_series(client, config)
        n = len(clean)
        split = split_index(n, config.train_fraction)
        if split < config.window_length + 1 or split >= n:
            raise ValueError(f"split {split} of {n} steps leaves no room for {config.window_length}-step windows")

        stage = "attack"
        if config.attack.anomaly_fraction == 0.0:
            attacked, truth = clean, np.zeros(n, dtype=bool)
        else:
            attacked, truth = attack_mod.inject_attacks(clean, config.attack, derive_rng(config.seed, "attack", cid))

        stage = "detector"
        predicted, scores, calibration, det_params, det_history = _run_detector(
            cid, clean, attacked, truth, split, config)

        stage = "filter"
        if predicted.any():
            filtered_values, segments = filter_anomalies(attacked.values, predicted, config.max_gap)
            filtered = attacked.with_values(filtered_values)
        else:
            filtered, segments = attacked, []

        stage = "scale"
        series = {"clean": clean, "attacked": attacked, "filtered": filtered}
        scalers = _fit_scalers(cid, series, split, config.scaler_mode)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, cid, exc) from exc
    return ClientScenario(
        cid, clean, attacked, filtered, truth, predicted, scores, segments, calibration,
        scalers, split, config.window_length, det_params, det_history,
    )


def build_scenarios(config, output_dir=None):
    """Build every client's three scenarios; persist them if ``output_dir`` is given."""
    started = time.perf_counter()
    clients = {}
    for client in sorted(config.clients, key=lambda c: c.id):
        logger.info("building scenarios for client %s", client.id)
        clients[client.id] = build_client(client, config)
    bundle = ScenarioBundle(clients, time.perf_counter() - started)
    if output_dir is not None:
        save_scenarios(bundle, output_dir)
    return bundle


# --------------------------------------------------------------------------- persistence


def _scaler_dict(s):
    return {"min": s.min, "max": s.max, "client_id": s.client_id}


def save_scenarios(bundle, output_dir):
    root = Path(output_dir) / "scenarios"
    for sc in bundle:
        d = root / sc.client_id
        d.mkdir(parents=True, exist_ok=True)
        write_csv(d / "clean.csv", sc.clean)
        attack_mod.export_attacked(d / "attacked.csv", sc.attacked, sc.truth_mask)
        export_filtered(d / "filtered.csv", sc.filtered, sc.segments)
        scores = [""] * len(sc.clean)
        if sc.window_scores is not None:
            scores[sc.window_length - 1:] = [float(x) for x in sc.window_scores]
        write_csv(d / "detection.csv", sc.attacked,
                      {"window_score": scores, "is_flagged": sc.predicted_mask}, value_name="attacked")
        meta = {
            "client_id": sc.client_id,
            "split": sc.split,
            "window_length": sc.window_length,
            "resolution_seconds": sc.clean.resolution.total_seconds(),
            "scalers": {k: _scaler_dict(v) for k, v in sc.scalers.items()},
            "calibration": None if sc.calibration is None else sc.calibration.to_dict(),
            "segments": [[s.start, s.end] for s in sc.segments],
            "attacked_fraction": attack_mod.attacked_fraction(sc.truth_mask),
            "detector_training": sc.detector_history,
        }
        _write_text(d / "scenario.json", json.dumps(meta, indent=2) + "\n")
        if sc.detector_params is not None:
            sc.detector_params.save(d / "detector_params.json")


def load_scenarios(output_dir):
    """Inverse of :func:`save_scenarios`."""
    root = Path(output_dir) / "scenarios"
    if not root.is_dir():
        raise FileNotFoundError(f"no scenarios under {root}")
    clients = {}
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        meta = json.loads((d / "scenario.json").read_text())
        cid = meta["client_id"]
        res = timedelta(seconds=meta["resolution_seconds"])
        clean = load_csv(d / "clean.csv", client_id=cid, resolution=res)
        attacked = load_csv(d / "attacked.csv", client_id=cid, resolution=res)
        filtered = load_csv(d / "filtered.csv", client_id=cid, resolution=res)
        truth = read_flag_column(d / "attacked.csv", "is_attack")
        predicted = read_flag_column(d / "detection.csv", "is_flagged")
        with open(d / "detection.csv", newline="") as fh:
            raw_scores = [r["window_score"] for r in csv.DictReader(fh)]
        L = meta["window_length"]
        scores = None if meta["calibration"] is None else np.array([float(x) for x in raw_scores[L - 1:]])
        params_path = d / "detector_params.json"
        clients[cid] = ClientScenario(
            cid, clean, attacked, filtered, truth, predicted, scores,
            [AnomalySegment(s, e) for s, e in meta["segments"]],
            None if meta["calibration"] is None else det.DetectorCalibration.from_dict(meta["calibration"]),
            {k: ScalerParams(v["min"], v["max"], v["client_id"]) for k, v in meta["scalers"].items()},
            meta["split"], L,
            ModelParameters.load(params_path) if params_path.exists() else None,
            meta["detector_training"],
        )
    if not clients:
        raise FileNotFoundError(f"{root} holds no client scenarios")
    return ScenarioBundle(clients)


# --------------------------------------------------------------------------- experiment matrix


@dataclass
class ArmResult:
    name: str
    architecture: str
    scenario: str
    reports: dict  # client id -> ForecastReport
    predictions: dict  # client id -> predicted test values, original units
    history: list
    seconds: float

    def mean_r2(self):
        vals = [r.r2 for r in self.reports.values() if r.r2 is not None]
        return float(np.mean(vals)) if vals else None


@dataclass
class ExperimentResults:
    seed: int
    clients: list
    arms: list
    detection: dict  # client id -> DetectionReport
    actuals: dict  # client id -> clean test values
    timestamps: dict  # client id -> ISO strings of the test steps
    timing: dict = field(default_factory=dict)

    def arm(self, name):
        for a in self.arms:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def overall_detection(self):
        return pooled_detection(list(self.detection.values()))

    def recovery(self, client_id=None):
        """Percent of the clean-to-attacked R^2 loss recovered by filtering."""
        if client_id is None:
            r2 = [self.arm(n).mean_r2() for n in ("fed_clean", "fed_attacked", "fed_filtered")]
        else:
            r2 = [self.arm(n).reports[client_id].r2 for n in ("fed_clean", "fed_attacked", "fed_filtered")]
        return recovery_percentage(*r2)

    def winner(self, client_id):
        fed = self.arm("fed_filtered").reports[client_id].r2
        cen = self.arm("central_filtered").reports[client_id].r2
        if fed is None or cen is None:
            return "undefined"
        if fed == cen:
            return "tie"
        return "federated" if fed > cen else "centralized"

    def to_dict(self):
        return {
            "seed": self.seed,
            "clients": list(self.clients),
            "arms": [
                {
                    "name": a.name,
                    "architecture": a.architecture,
                    "scenario": a.scenario,
                    "reports": {c: r.to_dict() for c, r in a.reports.items()},
                    "predictions": {c: [float(x) for x in p] for c, p in a.predictions.items()},
                    "history": a.history,
                }
                for a in self.arms
            ],
            "detection": {c: r.to_dict() for c, r in self.detection.items()},
            "actuals": {c: [float(x) for x in v] for c, v in self.actuals.items()},
            "timestamps": self.timestamps,
        }

    @classmethod
    def from_dict(cls, d):
        arms = []
        for a in d["arms"]:
            arms.append(ArmResult(
                a["name"], a["architecture"], a["scenario"],
                {c: ForecastReport(**r) for c, r in a["reports"].items()},
                {c: np.array(p) for c, p in a["predictions"].items()},
                a["history"], 0.0,
            ))
        detection = {}
        for c, r in d["detection"].items():
            r = dict(r)
            r.pop("true_attacks_detected", None)
            detection[c] = DetectionReport(**r)
        return cls(d["seed"], list(d["clients"]), arms, detection,
                   {c: np.array(v) for c, v in d["actuals"].items()}, d["timestamps"])


def _evaluate(model, params, bundle, scenario):
    reports, predictions = {}, {}
    for sc in bundle:
        _, test = sc.datasets(scenario)
        pred_scaled = model.predict(params, test.model_inputs())
        pred, _ = inverse_scale_predictions(pred_scaled, test.targets, sc.scalers[scenario], sc.client_id)
        reports[sc.client_id] = forecast_metrics(pred, sc.test_targets())
        predictions[sc.client_id] = pred
    return reports, predictions


def run_experiment_matrix(bundle, config):
    """Train and score the four arms. All arms start from the same initial weights."""
    fed_config = replace(config.federation, seed=derive_int(config.seed, "federation"))
    model = fed_config.model()
    init = initial_params(fed_config)
    arms, timing = [], {"scenarios": bundle.seconds}
    for name, architecture, scenario in ARMS:
        logger.info("training arm %s", name)
        train_sets = {sc.client_id: sc.datasets(scenario)[0] for sc in bundle}
        if architecture == "federated":
            clients = [ClientState(cid, ds) for cid, ds in train_sets.items()]
            result = run_federation(clients, fed_config, init)
        else:
            result = centralized_train(list(train_sets.values()), fed_config, init)
        reports, predictions = _evaluate(model, result.params, bundle, scenario)
        arms.append(ArmResult(name, architecture, scenario, reports, predictions,
                              result.history_records(), result.seconds))
        timing[name] = result.seconds
    detection = {
        sc.client_id: detection_metrics(sc.predicted_mask, sc.truth_mask, slice(sc.split, len(sc.clean)))
        for sc in bundle
    }
    return ExperimentResults(
        config.seed,
        list(bundle.clients),
        arms,
        detection,
        {sc.client_id: sc.test_targets().copy() for sc in bundle},
        {sc.client_id: [t.isoformat() for t in sc.test_timestamps()] for sc in bundle},
        timing,
    )


# --------------------------------------------------------------------------- reports

TABLE1_HEADER = ["arm", "architecture", "scenario", "client", "mae", "rmse", "r2", "n"]
TABLE2_HEADER = ["client", "tp", "fp", "tn", "fn", "precision", "recall", "f1",
                 "true_attacks_detected", "fpr"]
TABLE3_HEADER = ["client", "federated_mae", "centralized_mae", "federated_rmse", "centralized_rmse",
                 "federated_r2", "centralized_r2", "r2_difference_pct", "winner"]
PREDICTION_HEADER = ["timestamp", "actual", "predicted"]


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _pct_diff(fed, cen):
    if fed is None or cen is None or cen == 0:
        return None
    return 100.0 * (fed - cen) / abs(cen)


def _summary(results):
    arms = {a.name: {"mean_r2": a.mean_r2(),
                     "mean_mae": float(np.mean([r.mae for r in a.reports.values()])),
                     "mean_rmse": float(np.mean([r.rmse for r in a.reports.values()]))}
            for a in results.arms}
    return {
        "seed": results.seed,
        "clients": results.clients,
        "arms": arms,
        "recovery_pct": results.recovery(),
        "recovery_pct_per_client": {c: results.recovery(c) for c in results.clients},
        "detection_overall": results.overall_detection.to_dict(),
        "winner_per_client": {c: results.winner(c) for c in results.clients},
    }


def render_reports(results):
    """Every report file as {relative path: text}. Nothing touches the disk."""
    if not results.arms or not results.clients:
        raise ValueError("results are empty; nothing to report")
    names = [a.name for a in results.arms]
    missing = [n for n, _, _ in ARMS if n not in names]
    if missing:
        raise ValueError(f"results lack arms {missing}")
    for a in results.arms:
        if set(a.reports) != set(results.clients):
            raise ValueError(f"arm {a.name} lacks reports for some clients")

    files = {}
    files["table1_performance.csv"] = _csv_text(TABLE1_HEADER, [
        [a.name, a.architecture, a.scenario, c, r.mae, r.rmse, r.r2, r.n]
        for a in results.arms for c, r in a.reports.items()
    ])
    det_rows = []
    for c in results.clients:
        r = results.detection[c]
        det_rows.append([c, r.tp, r.fp, r.tn, r.fn, r.precision, r.recall, r.f1, r.true_attacks_detected, r.fpr])
    o = results.overall_detection
    det_rows.append(["overall", o.tp, o.fp, o.tn, o.fn, o.precision, o.recall, o.f1, o.true_attacks_detected, o.fpr])
    files["table2_detection.csv"] = _csv_text(TABLE2_HEADER, det_rows)
    fed, cen = results.arm("fed_filtered"), results.arm("central_filtered")
    files["table3_per_client.csv"] = _csv_text(TABLE3_HEADER, [
        [c, fed.reports[c].mae, cen.reports[c].mae, fed.reports[c].rmse, cen.reports[c].rmse,
         fed.reports[c].r2, cen.reports[c].r2, _pct_diff(fed.reports[c].r2, cen.reports[c].r2),
         results.winner(c)]
        for c in results.clients
    ])
    files["history.json"] = json.dumps({a.name: a.history for a in results.arms}, indent=1) + "\n"
    for a in results.arms:
        for c in results.clients:
            files[f"predictions/{a.name}/predictions_{c}.csv"] = _csv_text(
                PREDICTION_HEADER, zip(results.timestamps[c], results.actuals[c], a.predictions[c]))
    files["summary.json"] = json.dumps(_summary(results), indent=2) + "\n"
    files["results.json"] = json.dumps(results.to_dict()) + "\n"
    return files


def ensure_writable(output_dir):
    """Create ``output_dir`` if needed and prove a file can be written there."""
    path = Path(output_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path, prefix=".probe-"):
            pass
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable: {exc}") from exc
    return path


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def emit_reports(results, output_dir):
    """Write all report files. Wall-clock timings go to ``timing.json`` only,
    so every other file is a pure function of data, config and seed."""
    files = render_reports(results)
    root = ensure_writable(output_dir)
    for rel, text in files.items():
        _write_text(root / rel, text)
    if results.timing:
        _write_text(root / "timing.json", json.dumps(results.timing, indent=2) + "\n")
    return sorted(files)


def load_results(path):
    return ExperimentResults.from_dict(json.loads(Path(path).read_text()))


def run_experiment(config, output_dir=None):
    """Scenarios, matrix and reports in one call. Returns the results."""
    out = ensure_writable(output_dir or config.output_dir)
    started = time.perf_counter()
    bundle = build_scenarios(config, out)
    results = run_experiment_matrix(bundle, config)
    results.timing["total"] = time.perf_counter() - started
    emit_reports(results, out)
    return results
