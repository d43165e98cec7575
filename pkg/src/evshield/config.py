"""Experiment configuration: a YAML key-value tree mapped onto dataclasses.

Schema (every key optional except ``clients``)::

    seed: 0                      # master seed
    output_dir: runs/example
    window_length: 24
    train_fraction: 0.8
    scaler_mode: full-range      # full-range | train-only
    clients:
      - id: c1
        csv: data/zone102.csv    # timestamp,volume
      - id: c2
        synthetic: {base_level: 40, daily_amplitude: 15, weekly_amplitude: 6,
                    noise_std: 3, length: 4344}      # optional seed
    attack:     {intensity_multiplier, anomaly_fraction, burst_length_range,
                 multiplier_jitter, min_separation, mode}   # fraction 0: no attack
    detector:   {percentile, mapping, enabled, max_epochs, batch_size, learning_rate,
                 patience, validation_fraction, dropout_rate,
                 encoder_units, decoder_units}
    filter:     {max_gap}
    federation: {rounds, epochs_per_round, batch_size, learning_rate,
                 averaging, lstm_units, dense_units, max_workers}
"""
import dataclasses
from dataclasses import dataclass, field

import yaml

from .attack import AttackConfig
from .detector import MAPPING_MODES, AutoencoderConfig
from .fed import FederationConfig

SCALER_MODES = ("full-range", "train-only")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ClientSpec:
    id: str
    csv: str | None = None
    synthetic: dict | None = None

    def __post_init__(self):
        if (self.csv is None) == (self.synthetic is None):
            raise ConfigError(f"client {self.id}: give exactly one of csv or synthetic")


@dataclass(frozen=True)
class DetectorSettings:
    percentile: float = 98.0
    mapping: str = "all"
    autoencoder: AutoencoderConfig = AutoencoderConfig()
    enabled: bool = True  # False: flag nothing, so filtering is a no-op

    def __post_init__(self):
        if self.mapping not in MAPPING_MODES:
            raise ConfigError(f"detector.mapping must be one of {MAPPING_MODES}")
        if not 0 < self.percentile <= 100:
            raise ConfigError("detector.percentile must lie in (0, 100]")


@dataclass(frozen=True)
class ExperimentConfig:
    clients: tuple
    seed: int = 0
    output_dir: str = "runs/default"
    window_length: int = 24
    train_fraction: float = 0.8
    scaler_mode: str = "full-range"
    attack: AttackConfig = AttackConfig()
    detector: DetectorSettings = DetectorSettings()
    max_gap: int = 2
    federation: FederationConfig = FederationConfig()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.clients:
            raise ConfigError("at least one client is required")
        ids = [c.id for c in self.clients]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate client ids in {ids}")
        if self.scaler_mode not in SCALER_MODES:
            raise ConfigError(f"scaler_mode must be one of {SCALER_MODES}")
        if self.window_length < 1:
            raise ConfigError("window_length must be positive")
        if self.detector.autoencoder.window_length != self.window_length:
            raise ConfigError("detector window length must equal window_length")
        if self.max_gap < 0:
            raise ConfigError("filter.max_gap must be non-negative")
        if self.attack.anomaly_fraction != 0.0:  # zero means: no attack at all
            self.attack.validate()

    def with_overrides(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        ae = self.detector.autoencoder
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "window_length": self.window_length,
            "train_fraction": self.train_fraction,
            "scaler_mode": self.scaler_mode,
            "clients": [
                {"id": c.id, **({"csv": c.csv} if c.csv else {"synthetic": dict(c.synthetic)})}
                for c in self.clients
            ],
            "attack": {
                k: (list(v) if isinstance(v, tuple) else v)
                for k, v in dataclasses.asdict(self.attack).items()
                if k not in ("seed", "max_retries")
            },
            "detector": {
                "percentile": self.detector.percentile,
                "mapping": self.detector.mapping,
                "enabled": self.detector.enabled,
                **{
                    k: (list(v) if isinstance(v, tuple) else v)
                    for k, v in dataclasses.asdict(ae).items()
                    if k != "window_length"
                },
            },
            "filter": {"max_gap": self.max_gap},
            "federation": {
                k: v for k, v in dataclasses.asdict(self.federation).items() if k != "seed"
            },
        }


def _take(section, cls, name, exclude=()):
    section = dict(section or {})
    allowed = {f.name for f in dataclasses.fields(cls)} - set(exclude)
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    for k, v in section.items():
        if isinstance(v, list):
            section[k] = tuple(v)
    return section


def config_from_dict(raw):
    raw = dict(raw or {})
    top = {"seed", "output_dir", "window_length", "train_fraction", "scaler_mode",
           "clients", "attack", "detector", "filter", "federation"}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    window = int(raw.get("window_length", 24))
    clients = []
    for entry in raw.get("clients") or []:
        entry = dict(entry)
        bad = set(entry) - {"id", "csv", "synthetic"}
        if bad or "id" not in entry:
            raise ConfigError(f"client entry {entry}: needs 'id' and one of csv/synthetic")
        clients.append(ClientSpec(str(entry["id"]), entry.get("csv"), entry.get("synthetic")))
    try:
        attack = AttackConfig(**_take(raw.get("attack"), AttackConfig, "attack", ("seed",)))
        det_raw = dict(raw.get("detector") or {})
        percentile = float(det_raw.pop("percentile", 98.0))
        mapping = det_raw.pop("mapping", "all")
        enabled = bool(det_raw.pop("enabled", True))
        ae = AutoencoderConfig(window_length=window,
                               **_take(det_raw, AutoencoderConfig, "detector", ("window_length",)))
        filt = dict(raw.get("filter") or {})
        if set(filt) - {"max_gap"}:
            raise ConfigError(f"filter: unknown keys {sorted(set(filt) - {'max_gap'})}")
        fed = FederationConfig(**_take(raw.get("federation"), FederationConfig, "federation", ("seed",)))
        return ExperimentConfig(
            clients=tuple(clients),
            seed=int(raw.get("seed", 0)),
            output_dir=str(raw.get("output_dir", "runs/default")),
            window_length=window,
            train_fraction=float(raw.get("train_fraction", 0.8)),
            scaler_mode=raw.get("scaler_mode", "full-range"),
            attack=attack,
            detector=DetectorSettings(percentile, mapping, ae, enabled),
            max_gap=int(filt.get("max_gap", 2)),
            federation=fed,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path) as fh:
        return config_from_dict(yaml.safe_load(fh))


def dump_config(config, path):
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


BENCHMARK_PROFILES = (
    {"id": "c1", "synthetic": {"base_level": 40.0, "daily_amplitude": 15.0, "weekly_amplitude": 6.0,
                               "noise_std": 3.0, "length": 4344}},
    {"id": "c2", "synthetic": {"base_level": 25.0, "daily_amplitude": 8.0, "weekly_amplitude": 10.0,
                               "noise_std": 2.5, "length": 4344}},
    {"id": "c3", "synthetic": {"base_level": 60.0, "daily_amplitude": 25.0, "weekly_amplitude": 5.0,
                               "noise_std": 6.0, "length": 4344}},
)


def benchmark_config(seed=0, output_dir="runs/benchmark", **sections):
    """The three-client synthetic benchmark with default pipeline settings."""
    raw = {"seed": seed, "output_dir": output_dir, "clients": [dict(c) for c in BENCHMARK_PROFILES]}
    raw.update(sections)
    return config_from_dict(raw)
