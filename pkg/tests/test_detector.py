import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evshield.detector import (
    AutoencoderConfig,
    DetectorCalibration,
    DetectorError,
    EarlyStopping,
    calibrate_threshold,
    flag_anomalies,
    map_window_flags,
    reconstruction_errors,
    sliding_windows,
    train_autoencoder,
)

SMALL = AutoencoderConfig(window_length=6, encoder_units=(8, 4), decoder_units=(4, 8),
                          max_epochs=4, batch_size=8, patience=3)


def brute_force_mapping(window_flags, length, L, mode):
    out = [False] * length
    for t in range(L - 1, length):
        covering = [k for k in range(len(window_flags)) if k <= t < k + L]
        verdicts = [bool(window_flags[k]) for k in covering]
        if mode == "end":
            out[t] = bool(window_flags[t - L + 1])
        elif mode == "any":
            out[t] = any(verdicts)
        else:
            out[t] = all(verdicts)
    return np.array(out)


class TestCalibration:
    def test_percentile_oracle(self):
        # linear interpolation: rank (n - 1) * 0.98 = 97.02 -> 98 + 0.02 * (99 - 98)
        cal = calibrate_threshold(np.arange(1, 101, dtype=float), 98)
        assert cal.threshold == pytest.approx(98.02, abs=1e-12)

    def test_hundredth_is_max(self, rng):
        s = rng.random(77)
        assert calibrate_threshold(s, 100).threshold == s.max()

    def test_all_equal(self):
        assert calibrate_threshold(np.full(60, 0.25), 98).threshold == 0.25

    def test_errors_and_warning(self, caplog):
        with pytest.raises(DetectorError):
            calibrate_threshold([], 98)
        with pytest.raises(DetectorError):
            calibrate_threshold([1.0, 2.0], 0)
        with caplog.at_level(logging.WARNING):
            calibrate_threshold(np.arange(10.0), 98)
        assert "only 10 scores" in caplog.text

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 10), min_size=1, max_size=200), st.floats(1, 100))
    def test_matches_rank_interpolation(self, scores, p):
        s = np.sort(np.array(scores))
        pos = (len(s) - 1) * p / 100
        lo = int(np.floor(pos))
        hi = min(lo + 1, len(s) - 1)
        expected = s[lo] + (s[hi] - s[lo]) * (pos - lo)
        assert calibrate_threshold(scores, p).threshold == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_round_trip_dict(self, rng):
        cal = calibrate_threshold(rng.random(100))
        assert DetectorCalibration.from_dict(cal.to_dict()) == cal


class TestMapping:
    def test_single_spiked_window_on_30_steps(self):
        L, n = 24, 30
        wf = np.zeros(n - L + 1, dtype=bool)
        wf[3] = True  # window covering steps 3..26
        assert np.flatnonzero(map_window_flags(wf, n, L, "end")).tolist() == [26]
        assert np.flatnonzero(map_window_flags(wf, n, L, "any")).tolist() == list(range(23, 27))
        assert not map_window_flags(wf, n, L, "all").any()

    def test_all_windows_flagged(self):
        m = map_window_flags(np.ones(7, bool), 30, 24, "all")
        assert not m[:23].any() and m[23:].all()

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 30), st.sampled_from(["end", "any", "all"]), st.data())
    def test_matches_brute_force(self, L, extra, mode, data):
        n = L + extra
        wf = np.array(data.draw(st.lists(st.booleans(), min_size=n - L + 1, max_size=n - L + 1)))
        assert np.array_equal(map_window_flags(wf, n, L, mode), brute_force_mapping(wf, n, L, mode))

    def test_rejects_bad_input(self):
        with pytest.raises(DetectorError):
            map_window_flags(np.ones(3, bool), 10, 5, "end")
        with pytest.raises(DetectorError):
            map_window_flags(np.ones(6, bool), 10, 5, "middle")


@pytest.fixture(scope="module")
def trained():
    t = np.arange(400)
    values = 0.5 + 0.3 * np.sin(2 * np.pi * t / 24)
    windows = np.array(sliding_windows(values, SMALL.window_length))
    params, report = train_autoencoder(windows, SMALL, np.random.default_rng(3))
    return params, report, windows, values


class TestAutoencoder:
    def test_zero_network_scores_mean_square(self, rng):
        params = SMALL.model().init_params(rng).zeros_like()
        w = rng.random((5, 6))
        assert np.allclose(reconstruction_errors(params, w, SMALL), np.mean(w ** 2, axis=1), rtol=0, atol=1e-15)

    def test_scores_are_per_window(self, trained, rng):
        params, _, windows, _ = trained
        perm = rng.permutation(len(windows))
        a = reconstruction_errors(params, windows, SMALL)
        b = reconstruction_errors(params, windows[perm], SMALL)
        assert np.allclose(a[perm], b, rtol=0, atol=1e-14)
        assert np.all(a >= 0)

    def test_constant_windows_become_easier(self, rng):
        w = np.full((80, 6), 0.6)
        cfg = AutoencoderConfig(window_length=6, encoder_units=(8, 4), decoder_units=(4, 8),
                                max_epochs=15, batch_size=8, patience=15)
        init = cfg.model().init_params(np.random.default_rng(1))
        before = reconstruction_errors(init, w, cfg).mean()
        params, _ = train_autoencoder(w, cfg, np.random.default_rng(1), init_params=init)
        assert reconstruction_errors(params, w, cfg).mean() < before

    def test_best_snapshot_is_returned(self, trained):
        params, report, windows, _ = trained
        n_val = max(1, int(len(windows) * SMALL.validation_fraction))
        val = windows[-n_val:]
        best = min(report.val_loss)
        assert np.mean(reconstruction_errors(params, val, SMALL)) == pytest.approx(best, rel=1e-12)
        assert report.best_epoch == int(np.argmin(report.val_loss))

    def test_deterministic(self, trained):
        params, _, windows, _ = trained
        again, _ = train_autoencoder(windows, SMALL, np.random.default_rng(3))
        assert again.array_equal(params)

    def test_rejects_bad_inputs(self, rng):
        with pytest.raises(DetectorError):
            train_autoencoder(np.empty((0, 6)), SMALL)
        with pytest.raises(DetectorError):
            train_autoencoder(rng.random((9, 6)), SMALL)  # one training batch only
        with pytest.raises(DetectorError):
            train_autoencoder(rng.random((100, 5)), SMALL)
        with pytest.raises(DetectorError):
            reconstruction_errors(SMALL.model().init_params(rng), rng.random((4, 5)), SMALL)


class TestEarlyStopping:
    def test_plateau_stops_patience_epochs_after_best(self):
        stopper = EarlyStopping(10)
        losses = [5, 4, 3, 2, 1] + [1.5] * 30
        stopped_at = next(i for i, loss in enumerate(losses) if stopper.update(loss))
        assert stopped_at == 4 + 10
        assert stopper.best_epoch == 4

    def test_improvement_resets_the_clock(self):
        stopper = EarlyStopping(2)
        assert [stopper.update(x) for x in [3, 4, 2, 5, 6]] == [False, False, False, False, True]


class TestFlagging:
    def test_threshold_extremes(self, trained):
        params, _, _, values = trained
        high = DetectorCalibration(np.inf, 98.0, {})
        low = DetectorCalibration(-1.0, 98.0, {})
        for mode in ("end", "any", "all"):
            assert not flag_anomalies(params, high, values, SMALL, mode)[0].any()
            m, scores = flag_anomalies(params, low, values, SMALL, mode)
            assert not m[:5].any() and m[5:].all()
            assert len(scores) == len(values) - 5

    def test_spike_is_flagged(self, trained):
        params, _, windows, values = trained
        cal = calibrate_threshold(reconstruction_errors(params, windows, SMALL), 98)
        spiked = values.copy()
        spiked[200] *= 10.6
        mask, _ = flag_anomalies(params, cal, spiked, SMALL, "all")
        assert mask[200]

    def test_monotone_in_percentile(self, trained):
        params, _, windows, values = trained
        scores = reconstruction_errors(params, windows, SMALL)
        counts = [flag_anomalies(params, calibrate_threshold(scores, p), values, SMALL, "end")[0].sum()
                  for p in (50, 80, 90, 98, 100)]
        assert counts == sorted(counts, reverse=True)

    def test_inference_is_pure(self, trained):
        params, _, _, values = trained
        before = params.copy()
        cal = DetectorCalibration(0.01, 98.0, {"count": 1})
        flag_anomalies(params, cal, values, SMALL)
        assert params.array_equal(before)
        assert cal == DetectorCalibration(0.01, 98.0, {"count": 1})

    def test_too_short(self, trained):
        with pytest.raises(DetectorError):
            flag_anomalies(trained[0], DetectorCalibration(0.1, 98.0, {}), np.ones(5), SMALL)
