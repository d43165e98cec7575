from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evshield.attack import (
    DDOS_INTENSITY,
    AttackConfig,
    AttackError,
    attacked_fraction,
    export_attacked,
    inject_attacks,
    place_bursts,
)
from evshield.data import TimeSeries, load_csv, read_flag_column


def series(values):
    return TimeSeries("c", datetime(2022, 9, 1), np.asarray(values, dtype=float))


def runs(mask):
    """Lengths of the maximal True runs."""
    padded = np.concatenate([[False], mask, [False]]).astype(int)
    d = np.diff(padded)
    return np.flatnonzero(d == -1) - np.flatnonzero(d == 1)


def test_intensity_constant():
    # attack packet rate over normal packet rate, to one decimal
    assert DDOS_INTENSITY == round(350_500 / 33_000, 1)


def test_single_step_jitter_free():
    cfg = AttackConfig(multiplier_jitter=0.0, anomaly_fraction=0.01, burst_length_range=(1, 1))
    attacked, mask = inject_attacks(series(np.full(100, 10.0)), cfg, np.random.default_rng(0))
    assert mask.sum() == 1
    assert attacked.values[mask].tolist() == [106.0]
    assert np.array_equal(attacked.values[~mask], np.full(99, 10.0))


def test_full_length_count():
    s = series(np.random.default_rng(1).uniform(10, 50, 4344))
    for seed in range(10):
        _, mask = inject_attacks(s, AttackConfig(), np.random.default_rng(seed))
        # the last burst may overshoot the target by at most one burst
        assert 217 <= mask.sum() < 217 + 6
        assert abs(mask.sum() - 217) <= 0.05 * 217


@settings(max_examples=100, deadline=None)
@given(st.integers(200, 2000), st.integers(0, 2**31), st.integers(1, 30),
       st.integers(1, 4), st.integers(0, 4))
def test_burst_structure(n, seed, sep, lo, span):
    cfg = AttackConfig(anomaly_fraction=0.03, burst_length_range=(lo, lo + span), min_separation=sep)
    try:
        mask = place_bursts(n, cfg, np.random.default_rng(seed))
    except AttackError:
        return
    lengths = runs(mask)
    assert mask.sum() >= round(0.03 * n)
    assert mask.sum() - (lo + span) < round(0.03 * n)
    assert lengths.min() >= lo and lengths.max() <= lo + span
    idx = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(int)])) == 1)
    ends = np.flatnonzero(np.diff(np.concatenate([mask.astype(int), [0]])) == -1)
    assert np.all(idx[1:] - ends[:-1] - 1 >= sep)


def test_off_attack_untouched_and_severity(rng):
    s = series(rng.uniform(1, 100, 1000))
    attacked, mask = inject_attacks(s, AttackConfig(), rng)
    assert np.array_equal(attacked.values[~mask], s.values[~mask])
    assert np.all(attacked.values[mask] > s.values[mask])
    ratio = attacked.values[mask] / s.values[mask]
    assert ratio.min() >= 9.6 and ratio.max() <= 11.6


def test_additive_mode(rng):
    s = series(rng.uniform(1, 100, 500))
    cfg = AttackConfig(mode="additive", multiplier_jitter=0.0)
    attacked, mask = inject_attacks(s, cfg, rng)
    assert np.allclose(attacked.values[mask] - s.values[mask], 9.6 * s.values.mean())


def test_zero_values_labelled_but_unchanged():
    attacked, mask = inject_attacks(series(np.zeros(100)), AttackConfig(), np.random.default_rng(0))
    assert mask.any()
    assert np.all(attacked.values == 0.0)


def test_deterministic(rng):
    s = series(rng.uniform(1, 100, 800))
    a1, m1 = inject_attacks(s, AttackConfig(), np.random.default_rng(5))
    a2, m2 = inject_attacks(s, AttackConfig(), np.random.default_rng(5))
    assert a1.equals(a2) and np.array_equal(m1, m2)
    a3, m3 = inject_attacks(s, AttackConfig(seed=5))
    assert a3.equals(a1) and np.array_equal(m3, m1)


@pytest.mark.parametrize("kwargs", [
    dict(intensity_multiplier=1.5, multiplier_jitter=1.0),
    dict(burst_length_range=(0, 3)),
    dict(burst_length_range=(4, 3)),
    dict(anomaly_fraction=0.0),
    dict(min_separation=0),
    dict(mode="stealthy"),
    dict(multiplier_jitter=-0.1),
])
def test_invalid_configs(kwargs):
    with pytest.raises(AttackError):
        AttackConfig(**kwargs).validate(1000)


def test_fraction_too_small_for_length():
    with pytest.raises(AttackError):
        AttackConfig(anomaly_fraction=0.001).validate(100)


def test_unreachable_fraction_rejected():
    cfg = AttackConfig(anomaly_fraction=0.5, min_separation=24, max_retries=200)
    with pytest.raises(AttackError, match="could not place"):
        place_bursts(200, cfg, np.random.default_rng(0))


def test_attacked_fraction():
    assert attacked_fraction(np.zeros(4, bool)) == 0
    assert attacked_fraction(np.ones(4, bool)) == 1
    assert attacked_fraction(np.array([True, False, True, False])) == 0.5
    with pytest.raises(AttackError):
        attacked_fraction(np.array([], bool))


def test_export(tmp_path, rng):
    s = series(rng.uniform(1, 10, 200))
    attacked, mask = inject_attacks(s, AttackConfig(), rng)
    export_attacked(tmp_path / "a.csv", attacked, mask)
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "timestamp,volume,is_attack"
    assert load_csv(tmp_path / "a.csv", client_id="c").equals(attacked)
    assert np.array_equal(read_flag_column(tmp_path / "a.csv", "is_attack"), mask)
