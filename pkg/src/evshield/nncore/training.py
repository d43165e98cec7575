"""Mini-batch Adam training loops shared by the detector and the federation."""
import numpy as np

from .losses import mse_loss
from .optim import AdamState, adam_step


def minibatch_indices(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def train_epoch(model, params, state, inputs, targets, batch_size, rng):
    """One shuffled pass. Returns (params, state, sample-weighted mean loss)."""
    total = 0.0
    for idx in minibatch_indices(len(inputs), batch_size, rng):
        pred, cache = model.forward(params, inputs[idx], rng=rng, training=True)
        loss, d_pred = mse_loss(pred, targets[idx])
        grads = model.backward(params, cache, d_pred)
        params, state = adam_step(state, params, grads)
        total += loss * len(idx)
    return params, state, total / len(inputs)


def fit(model, params, inputs, targets, epochs, batch_size, learning_rate, rng):
    """Train from a fresh optimizer state. Returns (params, per-epoch losses)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    state = AdamState.fresh(params, learning_rate)
    losses = []
    for _ in range(epochs):
        params, state, loss = train_epoch(model, params, state, inputs, targets, batch_size, rng)
        losses.append(loss)
    return params, losses
