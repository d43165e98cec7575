"""The two network architectures used by the pipeline.

Both are stateless descriptions: parameters live in :class:`ModelParameters`
and every call takes them explicitly.
"""
import numpy as np

from .layers import (
    DenseLayerParams,
    LstmLayerParams,
    apply_dropout,
    dense_backward,
    dense_forward,
    lstm_backward,
    lstm_forward,
)
from .params import ModelParameters

PREDICT_CHUNK = 512


def _lstm(params, name):
    return LstmLayerParams(params[f"{name}.W"], params[f"{name}.U"], params[f"{name}.b"], name)


def _dense(params, name, activation):
    return DenseLayerParams(params[f"{name}.W"], params[f"{name}.b"], activation, name)


def _lstm_items(layer):
    return [(f"{layer.name}.W", layer.W), (f"{layer.name}.U", layer.U), (f"{layer.name}.b", layer.b)]


def _dense_items(layer):
    return [(f"{layer.name}.W", layer.W), (f"{layer.name}.b", layer.b)]


def _check_input(x, window, n_features):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != n_features or (window is not None and x.shape[1] != window):
        expected = f"(batch, {window if window is not None else 'T'}, {n_features})"
        raise ValueError(f"expected input windows {expected}, got {x.shape}")
    return x


class Forecaster:
    """LSTM (last hidden state) -> Dense(relu) -> Dense(1)."""

    def __init__(self, lstm_units=50, dense_units=10, n_features=1):
        self.lstm_units = lstm_units
        self.dense_units = dense_units
        self.n_features = n_features

    def init_params(self, rng):
        lstm = LstmLayerParams.initialize(self.n_features, self.lstm_units, rng, "lstm")
        hidden = DenseLayerParams.initialize(self.lstm_units, self.dense_units, rng, "relu", "dense")
        out = DenseLayerParams.initialize(self.dense_units, 1, rng, "identity", "out")
        return ModelParameters(_lstm_items(lstm) + _dense_items(hidden) + _dense_items(out))

    def forward(self, params, x, rng=None, training=False):
        x = _check_input(x, None, self.n_features)
        h, c1 = lstm_forward(_lstm(params, "lstm"), x)
        a, c2 = dense_forward(_dense(params, "dense", "relu"), h)
        y, c3 = dense_forward(_dense(params, "out", "identity"), a)
        return y, (c1, c2, c3)

    def backward(self, params, cache, d_out):
        c1, c2, c3 = cache
        g3, da = dense_backward(c3.params, c3, d_out)
        g2, dh = dense_backward(c2.params, c2, da)
        g1, _ = lstm_backward(c1.params, c1, dh)
        if c1.params.W is not params["lstm.W"]:
            raise ValueError("cache does not belong to these parameters")
        return ModelParameters(_lstm_items(g1) + _dense_items(g2) + _dense_items(g3))

    def predict(self, params, x):
        x = _check_input(x, None, self.n_features)
        out = [self.forward(params, x[i:i + PREDICT_CHUNK])[0][:, 0] for i in range(0, len(x), PREDICT_CHUNK)]
        return np.concatenate(out) if out else np.zeros(0)


class LstmAutoencoder:
    """Sequence autoencoder: LSTM 50 -> LSTM 25 | repeat | LSTM 25 -> LSTM 50 -> Dense(1).

    Dropout is applied to the encoding and to the last decoder layer's output,
    in training mode only.
    """

    def __init__(self, window_length, encoder_units=(50, 25), decoder_units=(25, 50),
                 dropout_rate=0.2, n_features=1):
        if len(encoder_units) != 2 or len(decoder_units) != 2:
            raise ValueError("autoencoder uses exactly two encoder and two decoder LSTM layers")
        self.window_length = window_length
        self.encoder_units = tuple(encoder_units)
        self.decoder_units = tuple(decoder_units)
        self.dropout_rate = dropout_rate
        self.n_features = n_features

    def init_params(self, rng):
        e1, e2 = self.encoder_units
        d1, d2 = self.decoder_units
        layers = [
            LstmLayerParams.initialize(self.n_features, e1, rng, "enc1"),
            LstmLayerParams.initialize(e1, e2, rng, "enc2"),
            LstmLayerParams.initialize(e2, d1, rng, "dec1"),
            LstmLayerParams.initialize(d1, d2, rng, "dec2"),
        ]
        head = DenseLayerParams.initialize(d2, self.n_features, rng, "identity", "head")
        items = [item for layer in layers for item in _lstm_items(layer)]
        return ModelParameters(items + _dense_items(head))

    def forward(self, params, x, rng=None, training=False):
        x = _check_input(x, self.window_length, self.n_features)
        T = x.shape[1]
        h1, c1 = lstm_forward(_lstm(params, "enc1"), x, return_sequence=True)
        code, c2 = lstm_forward(_lstm(params, "enc2"), h1)
        code_d, m1 = apply_dropout(code, self.dropout_rate, rng, training)
        rep = np.repeat(code_d[:, None, :], T, axis=1)
        h3, c3 = lstm_forward(_lstm(params, "dec1"), rep, return_sequence=True)
        h4, c4 = lstm_forward(_lstm(params, "dec2"), h3, return_sequence=True)
        h4_d, m2 = apply_dropout(h4, self.dropout_rate, rng, training)
        y, c5 = dense_forward(_dense(params, "head", "identity"), h4_d)
        scale = 1.0 / (1.0 - self.dropout_rate) if training else 1.0
        return y, (c1, c2, m1 * scale, c3, c4, m2 * scale, c5)

    def backward(self, params, cache, d_out):
        # m1, m2 hold the applied dropout scaling (mask / keep probability)
        c1, c2, m1, c3, c4, m2, c5 = cache
        if c1.params.W is not params["enc1.W"]:
            raise ValueError("cache does not belong to these parameters")
        g5, d = dense_backward(c5.params, c5, d_out)
        d = d * m2
        g4, d = lstm_backward(c4.params, c4, d)
        g3, d = lstm_backward(c3.params, c3, d)
        d = d.sum(axis=1) * m1
        g2, d = lstm_backward(c2.params, c2, d)
        g1, _ = lstm_backward(c1.params, c1, d)
        items = [item for g in (g1, g2, g3, g4) for item in _lstm_items(g)]
        return ModelParameters(items + _dense_items(g5))

    def reconstruct(self, params, x):
        x = _check_input(x, self.window_length, self.n_features)
        out = [self.forward(params, x[i:i + PREDICT_CHUNK])[0] for i in range(0, len(x), PREDICT_CHUNK)]
        return np.concatenate(out) if out else np.zeros((0,) + x.shape[1:])
