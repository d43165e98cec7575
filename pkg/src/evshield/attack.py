"""DDoS-like volume spike injection with exact ground-truth labels."""
from dataclasses import dataclass

import numpy as np

from .data import write_csv

# Attack traffic of 350,500 p/s against a normal 33,000 p/s baseline.
DDOS_INTENSITY = 10.6


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    intensity_multiplier: float = DDOS_INTENSITY
    anomaly_fraction: float = 0.05
    burst_length_range: tuple = (1, 6)
    multiplier_jitter: float = 1.0
    min_separation: int = 24
    mode: str = "multiplicative"
    max_retries: int = 10_000
    seed: int = 0

    def validate(self, length=None):
        lo, hi = self.burst_length_range
        if self.intensity_multiplier - self.multiplier_jitter <= 1.0:
            raise AttackError("intensity_multiplier - multiplier_jitter must exceed 1")
        if self.multiplier_jitter < 0:
            raise AttackError("multiplier_jitter must be non-negative")
        if not 1 <= lo <= hi:
            raise AttackError(f"invalid burst_length_range {self.burst_length_range}")
        if not 0.0 < self.anomaly_fraction < 1.0:
            raise AttackError("anomaly_fraction must lie in (0, 1)")
        if self.min_separation < 1:
            raise AttackError("min_separation must be at least 1 (adjacent bursts would merge)")
        if self.mode not in ("multiplicative", "additive"):
            raise AttackError(f"unknown attack mode {self.mode!r}")
        if length is not None:
            if self.anomaly_fraction * length < 1:
                raise AttackError(f"anomaly_fraction {self.anomaly_fraction} attacks no step of a length-{length} series")
            if lo > length:
                raise AttackError("bursts longer than the series")


def place_bursts(length, config, rng):
    """Non-overlapping bursts covering at least round(fraction * length) steps.

    Bursts are kept at least ``min_separation`` clean steps apart. Raises AttackError
    if ``max_retries`` consecutive placements collide.
    """
    lo, hi = config.burst_length_range
    target = max(1, round(config.anomaly_fraction * length))
    mask = np.zeros(length, dtype=bool)
    sep = config.min_separation
    flagged, failures = 0, 0
    while flagged < target:
        burst = int(rng.integers(lo, hi + 1))
        if burst > length:
            raise AttackError("bursts longer than the series")
        start = int(rng.integers(0, length - burst + 1))
        if mask[max(0, start - sep):start + burst + sep].any():
            failures += 1
            if failures >= config.max_retries:
                raise AttackError(
                    f"could not place bursts to reach fraction {config.anomaly_fraction} "
                    f"after {failures} attempts"
                )
            continue
        failures = 0
        mask[start:start + burst] = True
        flagged += burst
    return mask


def inject_attacks(series, config=AttackConfig(), rng=None):
    """Returns (attacked series, ground-truth mask). Unflagged steps are untouched."""
    config.validate(len(series))
    rng = np.random.default_rng(config.seed) if rng is None else rng
    mask = place_bursts(len(series), config, rng)
    clean = series.values
    m = config.intensity_multiplier
    j = config.multiplier_jitter
    factors = rng.uniform(m - j, m + j, size=int(mask.sum())) if j > 0 else np.full(int(mask.sum()), m)
    attacked = clean.copy()
    if config.mode == "multiplicative":
        attacked[mask] = clean[mask] * factors
    else:
        attacked[mask] = clean[mask] + (factors - 1.0) * float(np.mean(clean))
    return series.with_values(attacked), mask


def attacked_fraction(mask):
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        raise AttackError("empty mask")
    return float(mask.sum()) / mask.size


def export_attacked(path, attacked, mask):
    write_csv(path, attacked, {"is_attack": mask})
