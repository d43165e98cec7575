"""Per-client demand series: CSV ingest, synthetic generation, min-max
scaling, temporal splitting and supervised windowing."""
import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np

DEFAULT_START = datetime(2022, 9, 1)
HOUR = timedelta(hours=1)


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Equally spaced, gap-free series of non-negative demand values."""

    client_id: str
    start: datetime
    values: np.ndarray
    resolution: timedelta = HOUR

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise DataError(f"client {self.client_id}: series must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(v)):
            raise DataError(f"client {self.client_id}: non-finite values")
        if np.any(v < 0):
            raise DataError(f"client {self.client_id}: negative values")
        if self.resolution <= timedelta(0):
            raise DataError("resolution must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def timestamps(self):
        return [self.start + i * self.resolution for i in range(len(self))]

    def with_values(self, values):
        return replace(self, values=np.asarray(values, dtype=np.float64))

    def slice(self, start, stop):
        return TimeSeries(self.client_id, self.start + start * self.resolution,
                          self.values[start:stop], self.resolution)

    def equals(self, other):
        return (
            self.client_id == other.client_id
            and self.start == other.start
            and self.resolution == other.resolution
            and np.array_equal(self.values, other.values)
        )


def load_csv(path, client_id=None, timestamp_column="timestamp", value_column="volume",
             resolution=None):
    """Read one client's series. Rows may be unsorted; the grid must be complete.

    Row numbers in error messages count data rows from 1 (header excluded).
    """
    client_id = client_id or str(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (timestamp_column, value_column):
            if col not in header:
                raise DataError(f"{path}: missing column {col!r} (have {header})")
        for rownum, rec in enumerate(reader, start=1):
            try:
                ts = datetime.fromisoformat(rec[timestamp_column].strip())
            except (ValueError, AttributeError):
                raise DataError(f"{path}: row {rownum}: bad timestamp {rec[timestamp_column]!r}") from None
            try:
                val = float(rec[value_column])
            except (TypeError, ValueError):
                raise DataError(f"{path}: row {rownum}: non-numeric value {rec[value_column]!r}") from None
            if not math.isfinite(val) or val < 0:
                raise DataError(f"{path}: row {rownum}: value {val} must be finite and non-negative")
            rows.append((ts, val, rownum))
    if not rows:
        raise DataError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    if resolution is None:
        resolution = rows[1][0] - rows[0][0] if len(rows) > 1 else HOUR
    for (t0, _, r0), (t1, _, r1) in zip(rows, rows[1:]):
        step = t1 - t0
        if step == timedelta(0):
            raise DataError(f"{path}: duplicate timestamp {t1.isoformat()} (rows {r0} and {r1})")
        if step != resolution:
            raise DataError(
                f"{path}: gap in grid between {t0.isoformat()} (row {r0}) and "
                f"{t1.isoformat()} (row {r1}); expected step {resolution}"
            )
    return TimeSeries(client_id, rows[0][0], np.array([r[1] for r in rows]), resolution)


def write_csv(path, series, columns=None, value_name="volume"):
    """Write ``timestamp,<value_name>[,extra...]`` with exact float repr."""
    columns = columns or {}
    for name, col in columns.items():
        if len(col) != len(series):
            raise DataError(f"column {name!r} has {len(col)} entries, series has {len(series)}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", value_name, *columns])
        for i, ts in enumerate(series.timestamps()):
            extra = [_fmt(col[i]) for col in columns.values()]
            w.writerow([ts.isoformat(), repr(float(series.values[i])), *extra])


def read_flag_column(path, column):
    with open(path, newline="") as fh:
        return np.array([int(rec[column]) for rec in csv.DictReader(fh)], dtype=bool)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


@dataclass(frozen=True)
class SyntheticProfile:
    base_level: float
    daily_amplitude: float
    weekly_amplitude: float
    noise_std: float
    length: int
    seed: int = 0
    client_id: str = "synthetic"
    start: datetime = DEFAULT_START


def generate_synthetic(profile):
    """base + daily sine (24 h) + weekly sine (168 h) + Gaussian noise, clamped at 0."""
    p = profile
    if p.length < 1:
        raise DataError("length must be at least 1")
    if min(p.daily_amplitude, p.weekly_amplitude, p.noise_std) < 0:
        raise DataError("amplitudes and noise_std must be non-negative")
    if not p.base_level > p.daily_amplitude + p.weekly_amplitude:
        raise DataError("base_level must exceed daily_amplitude + weekly_amplitude")
    t = np.arange(p.length, dtype=np.float64)
    values = (
        p.base_level
        + p.daily_amplitude * np.sin(2 * np.pi * t / 24)
        + p.weekly_amplitude * np.sin(2 * np.pi * t / 168)
    )
    if p.noise_std > 0:
        values = values + np.random.default_rng(p.seed).normal(0.0, p.noise_std, p.length)
    return TimeSeries(p.client_id, p.start, np.maximum(values, 0.0))


@dataclass(frozen=True)
class ScalerParams:
    min: float
    max: float
    client_id: str | None = None

    def __post_init__(self):
        if not self.max >= self.min:
            raise DataError(f"scaler max {self.max} below min {self.min}")

    @property
    def degenerate(self):
        return self.max == self.min


def fit_scaler(values, client_id=None):
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise DataError("cannot fit a scaler to no values")
    return ScalerParams(float(v.min()), float(v.max()), client_id)


def scale(params, values):
    v = np.asarray(values, dtype=np.float64)
    if params.degenerate:
        return np.zeros_like(v)
    return (v - params.min) / (params.max - params.min)


def inverse_scale(params, scaled):
    s = np.asarray(scaled, dtype=np.float64)
    if params.degenerate:
        return np.full_like(s, params.min)
    return s * (params.max - params.min) + params.min


def split_index(n, train_fraction):
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    # rounding guards against products like 0.29 * 100 == 28.999999999999996
    return math.floor(round(train_fraction * n, 9))


def temporal_split(series, train_fraction=0.8, window_length=None):
    """Contiguous prefix/suffix split at floor(fraction * N)."""
    n = len(series)
    k = split_index(n, train_fraction)
    min_train = 1 if window_length is None else window_length + 1
    if k < min_train or k >= n:
        raise DataError(
            f"client {series.client_id}: series of length {n} too short for a "
            f"{train_fraction} split (train {k}, need >= {min_train} and a nonempty test part)"
        )
    return series.slice(0, k), series.slice(k, n)


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    """Row i of ``inputs`` is steps [i, i+L) of the source; ``targets[i]`` is step i+L."""

    inputs: np.ndarray
    targets: np.ndarray
    window_length: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape[1] != self.window_length:
            raise DataError(f"inputs must be (n, {self.window_length}), got {self.inputs.shape}")
        if len(self.inputs) != len(self.targets):
            raise DataError("inputs and targets differ in length")

    def __len__(self):
        return len(self.targets)

    def model_inputs(self):
        return self.inputs[:, :, None]

    def model_targets(self):
        return self.targets[:, None]

    @staticmethod
    def concatenate(datasets):
        datasets = list(datasets)
        if not datasets:
            raise DataError("nothing to concatenate")
        L = datasets[0].window_length
        if any(d.window_length != L for d in datasets):
            raise DataError("window lengths differ")
        return WindowedDataset(
            np.concatenate([d.inputs for d in datasets]),
            np.concatenate([d.targets for d in datasets]),
            L,
        )


def make_windows(values, window_length):
    v = np.asarray(values, dtype=np.float64)
    if window_length < 1 or v.size < window_length + 1:
        raise DataError(f"need at least {window_length + 1} values for windows of {window_length}, got {v.size}")
    inputs = np.lib.stride_tricks.sliding_window_view(v[:-1], window_length).copy()
    return WindowedDataset(inputs, v[window_length:].copy(), window_length)


def make_test_windows(train_values, test_values, window_length):
    """Windows whose targets are exactly the test steps; the first windows
    borrow their history from the end of the training segment."""
    train_values = np.asarray(train_values, dtype=np.float64)
    if train_values.size < window_length:
        raise DataError("training segment shorter than one window")
    joined = np.concatenate([train_values[-window_length:], np.asarray(test_values, dtype=np.float64)])
    return make_windows(joined, window_length)
