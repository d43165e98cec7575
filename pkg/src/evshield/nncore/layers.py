"""LSTM and dense layers with exact backward passes, plus dropout."""
from dataclasses import dataclass

import numpy as np

from .backend import kernels

ACTIVATIONS = ("relu", "identity")


class ShapeError(ValueError):
    pass


def glorot_uniform(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


@dataclass(frozen=True)
class LstmLayerParams:
    """Gate blocks are stacked input, forget, cell, output along axis 0."""

    W: np.ndarray  # (4H, input)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)
    name: str = "lstm"

    def __post_init__(self):
        G, H = np.shape(self.U)
        if G != 4 * H or np.shape(self.W)[0] != G or np.shape(self.b) != (G,):
            raise ShapeError(
                f"layer {self.name!r}: inconsistent shapes W{np.shape(self.W)} "
                f"U{np.shape(self.U)} b{np.shape(self.b)}"
            )

    @property
    def input_size(self):
        return self.W.shape[1]

    @property
    def hidden_size(self):
        return self.U.shape[1]

    @classmethod
    def initialize(cls, input_size, hidden_size, rng, name="lstm", forget_bias=1.0):
        G = 4 * hidden_size
        b = np.zeros(G)
        b[hidden_size:2 * hidden_size] = forget_bias
        return cls(
            glorot_uniform(rng, G, input_size),
            glorot_uniform(rng, G, hidden_size),
            b,
            name,
        )


@dataclass(frozen=True)
class DenseLayerParams:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "identity"
    name: str = "dense"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"layer {self.name!r}: unknown activation {self.activation!r}")
        if np.ndim(self.W) != 2 or np.shape(self.b) != (np.shape(self.W)[0],):
            raise ShapeError(
                f"layer {self.name!r}: inconsistent shapes W{np.shape(self.W)} b{np.shape(self.b)}"
            )

    @classmethod
    def initialize(cls, input_size, output_size, rng, activation="identity", name="dense"):
        return cls(glorot_uniform(rng, output_size, input_size), np.zeros(output_size), activation, name)


@dataclass
class LstmCache:
    params: LstmLayerParams
    x: np.ndarray
    hs: np.ndarray
    cs: np.ndarray
    tc: np.ndarray
    acts: np.ndarray
    return_sequence: bool
    squeezed: bool


@dataclass
class DenseCache:
    params: DenseLayerParams
    x: np.ndarray
    z: np.ndarray


def lstm_forward(params, sequence, return_sequence=False):
    """Run the recurrence from zero initial state.

    ``sequence`` is (T, input) or a batch (B, T, input). Returns hidden states
    (…, T, H) when ``return_sequence`` else the final hidden state (…, H), and a
    cache for :func:`lstm_backward`.
    """
    x = np.asarray(sequence, dtype=np.float64)
    squeezed = x.ndim == 2
    if squeezed:
        x = x[None]
    if x.ndim != 3 or x.shape[1] < 1 or x.shape[2] != params.input_size:
        raise ShapeError(
            f"layer {params.name!r}: expected sequence (T>=1, {params.input_size}), got {np.shape(sequence)}"
        )
    x = np.ascontiguousarray(x)
    hs, cs, tc, acts = kernels.lstm_forward(
        x,
        np.ascontiguousarray(params.W),
        np.ascontiguousarray(params.U),
        np.ascontiguousarray(params.b),
    )
    if return_sequence:
        out = np.transpose(hs[1:], (1, 0, 2))
    else:
        out = hs[-1]
    if squeezed:
        out = out[0]
    cache = LstmCache(params, x, hs, cs, tc, acts, return_sequence, squeezed)
    return out, cache


def lstm_backward(params, cache, upstream):
    """Exact BPTT. Returns (LstmLayerParams of gradients, input gradient)."""
    if not isinstance(cache, LstmCache):
        raise TypeError(f"layer {params.name!r}: not an LSTM cache")
    if cache.params is not params and not (
        cache.params.W is params.W and cache.params.U is params.U and cache.params.b is params.b
    ):
        raise ValueError(f"layer {params.name!r}: cache was produced with different parameters")
    T, B, H = cache.tc.shape
    d = np.asarray(upstream, dtype=np.float64)
    if cache.squeezed:
        d = d[None]
    expected = (B, T, H) if cache.return_sequence else (B, H)
    if d.shape != expected:
        raise ShapeError(f"layer {params.name!r}: upstream gradient {d.shape}, expected {expected}")
    if cache.return_sequence:
        dhs = np.ascontiguousarray(np.transpose(d, (1, 0, 2)))
    else:
        dhs = np.zeros((T, B, H))
        dhs[-1] = d
    dW, dU, db, dx = kernels.lstm_backward(
        dhs,
        cache.x,
        np.ascontiguousarray(params.W),
        np.ascontiguousarray(params.U),
        cache.hs,
        cache.cs,
        cache.tc,
        cache.acts,
    )
    if cache.squeezed:
        dx = dx[0]
    return LstmLayerParams(dW, dU, db, params.name), dx


def dense_forward(params, inputs):
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[-1] != params.W.shape[1]:
        raise ShapeError(
            f"layer {params.name!r}: expected trailing dimension {params.W.shape[1]}, got {x.shape}"
        )
    z = x @ params.W.T + params.b
    out = np.maximum(z, 0.0) if params.activation == "relu" else z
    return out, DenseCache(params, x, z)


def dense_backward(params, cache, upstream):
    if cache.params is not params and not (cache.params.W is params.W and cache.params.b is params.b):
        raise ValueError(f"layer {params.name!r}: cache was produced with different parameters")
    d = np.asarray(upstream, dtype=np.float64)
    if d.shape != cache.z.shape:
        raise ShapeError(f"layer {params.name!r}: upstream gradient {d.shape}, expected {cache.z.shape}")
    if params.activation == "relu":
        d = d * (cache.z > 0.0)
    n_out, n_in = params.W.shape
    d2 = d.reshape(-1, n_out)
    dW = d2.T @ cache.x.reshape(-1, n_in)
    db = d2.sum(axis=0)
    dx = d @ params.W
    return DenseLayerParams(dW, db, params.activation, params.name), dx


def apply_dropout(inputs, rate, rng=None, training=True):
    """Inverted dropout. Returns (output, keep mask)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = np.asarray(inputs, dtype=np.float64)
    if not training:
        return x, np.ones(x.shape, dtype=bool)
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    mask = rng.random(x.shape) >= rate
    return x * mask / (1.0 - rate), mask
