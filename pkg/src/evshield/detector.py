"""LSTM-autoencoder anomaly detector.

Windows are scored by reconstruction MSE, the threshold is a percentile of
the scores on normal training windows, and window verdicts are mapped onto
timestamps by one of the rules in :data:`MAPPING_MODES`.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .nncore import AdamState, LstmAutoencoder, train_epoch

logger = logging.getLogger(__name__)

MAPPING_MODES = ("end", "any", "all")


class DetectorError(ValueError):
    pass


@dataclass(frozen=True)
class AutoencoderConfig:
    window_length: int = 24
    encoder_units: tuple = (50, 25)
    decoder_units: tuple = (25, 50)
    dropout_rate: float = 0.2
    max_epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.001
    patience: int = 10
    validation_fraction: float = 0.1

    def model(self):
        return LstmAutoencoder(self.window_length, self.encoder_units, self.decoder_units, self.dropout_rate)


@dataclass
class TrainingReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def epochs_run(self):
        return len(self.train_loss)


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True once
    ``patience`` epochs have passed without improvement."""

    def __init__(self, patience):
        if patience < 1:
            raise ValueError("patience must be at least 1")
        self.patience = patience
        self.best = np.inf
        self.best_epoch = -1
        self.epoch = -1

    def update(self, loss):
        self.epoch += 1
        if loss < self.best:
            self.best = loss
            self.best_epoch = self.epoch
        return self.epoch - self.best_epoch >= self.patience


def train_autoencoder(windows, config=AutoencoderConfig(), rng=None, init_params=None):
    """Fit on normal windows (n, L). Returns (best-validation params, report).

    The last ``validation_fraction`` of the windows, in temporal order, is held
    out for early stopping.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 2 or len(w) == 0:
        raise DetectorError("no normal windows to train the autoencoder on")
    if w.shape[1] != config.window_length:
        raise DetectorError(f"windows have length {w.shape[1]}, config expects {config.window_length}")
    n_val = max(1, int(len(w) * config.validation_fraction))
    train, val = w[:-n_val, :, None], w[-n_val:, :, None]
    if len(train) <= config.batch_size:
        raise DetectorError(
            f"{len(train)} training windows give fewer than two batches of {config.batch_size}"
        )
    model = config.model()
    params = model.init_params(rng) if init_params is None else init_params
    state = AdamState.fresh(params, config.learning_rate)
    stopper = EarlyStopping(config.patience)
    report = TrainingReport()
    best = params
    for _ in range(config.max_epochs):
        params, state, loss = train_epoch(model, params, state, train, train, config.batch_size, rng)
        val_loss = float(np.mean((model.reconstruct(params, val) - val) ** 2))
        report.train_loss.append(loss)
        report.val_loss.append(val_loss)
        stop = stopper.update(val_loss)
        if stopper.best_epoch == stopper.epoch:
            best = params
        if stop:
            report.stopped_early = True
            break
    report.best_epoch = stopper.best_epoch
    return best, report


def reconstruction_errors(params, windows, config=AutoencoderConfig()):
    """Per-window reconstruction MSE in inference mode (no dropout)."""
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != config.window_length:
        raise DetectorError(f"windows must be (n, {config.window_length}), got {w.shape}")
    recon = config.model().reconstruct(params, w[:, :, None])[:, :, 0]
    return np.mean((recon - w) ** 2, axis=1)


@dataclass(frozen=True)
class DetectorCalibration:
    threshold: float
    percentile: float
    summary: dict

    def to_dict(self):
        return {"threshold": self.threshold, "percentile": self.percentile, "training_scores": self.summary}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["threshold"]), float(d["percentile"]), dict(d["training_scores"]))


def calibrate_threshold(scores, percentile=98.0):
    """Threshold at ``percentile`` of the scores, linear interpolation between
    closest ranks: position (n - 1) * p / 100 in the sorted scores."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise DetectorError("no scores to calibrate on")
    if not 0.0 < percentile <= 100.0:
        raise DetectorError(f"percentile must lie in (0, 100], got {percentile}")
    if s.size < 50:
        logger.warning("calibrating a %s-th percentile on only %d scores", percentile, s.size)
    threshold = float(np.percentile(s, percentile, method="linear"))
    summary = {
        "count": int(s.size),
        "min": float(s.min()),
        "p50": float(np.percentile(s, 50)),
        "p90": float(np.percentile(s, 90)),
        "p98": float(np.percentile(s, 98)),
        "max": float(s.max()),
    }
    return DetectorCalibration(threshold, float(percentile), summary)


def sliding_windows(values, window_length):
    v = np.asarray(values, dtype=np.float64)
    if v.size < window_length:
        raise DetectorError(f"series of length {v.size} is shorter than one window ({window_length})")
    return np.lib.stride_tricks.sliding_window_view(v, window_length)


def map_window_flags(window_flags, length, window_length, mode="all"):
    """Turn verdicts on windows [k, k+L) into per-timestamp flags.

    ``end``: the window ending at t decides. ``any``/``all``: any/every window
    covering t must be anomalous. The first L-1 timestamps are never flagged.
    """
    if mode not in MAPPING_MODES:
        raise DetectorError(f"unknown mapping mode {mode!r}")
    wf = np.asarray(window_flags, dtype=bool)
    L = window_length
    if wf.size != length - L + 1:
        raise DetectorError(f"{wf.size} window verdicts for a length-{length} series")
    out = np.zeros(length, dtype=bool)
    if mode == "end":
        out[L - 1:] = wf
        return out
    # windows covering t are k in [max(0, t-L+1), min(t, n_win-1)]
    counts = np.concatenate([[0], np.cumsum(wf)])
    t = np.arange(L - 1, length)
    lo = np.maximum(0, t - L + 1)
    hi = np.minimum(t, wf.size - 1)
    hits = counts[hi + 1] - counts[lo]
    out[L - 1:] = hits > 0 if mode == "any" else hits == hi - lo + 1
    return out


def flag_anomalies(params, calibration, scaled_values, config=AutoencoderConfig(), mode="all"):
    """Predicted anomaly mask for a (scaled) series. Returns (mask, window scores)."""
    windows = sliding_windows(scaled_values, config.window_length)
    scores = reconstruction_errors(params, windows, config)
    mask = map_window_flags(scores > calibration.threshold, len(scaled_values), config.window_length, mode)
    return mask, scores
