"""Minimal float64 neural-network engine: LSTM/dense layers with exact
gradients, MSE loss, Adam and dropout.

The LSTM recurrence runs in a compiled extension when available and falls
back to numpy otherwise; see :mod:`evshield.nncore.backend`.
"""
from .backend import BACKEND, available_backends
from .gradcheck import compare_gradients, numerical_gradient
from .layers import (
    DenseLayerParams,
    LstmLayerParams,
    ShapeError,
    apply_dropout,
    dense_backward,
    dense_forward,
    lstm_backward,
    lstm_forward,
)
from .losses import mse_loss
from .networks import Forecaster, LstmAutoencoder
from .optim import AdamState, adam_step
from .params import ModelParameters
from .training import fit, train_epoch

__all__ = [
    "BACKEND",
    "AdamState",
    "DenseLayerParams",
    "Forecaster",
    "LstmAutoencoder",
    "LstmLayerParams",
    "ModelParameters",
    "ShapeError",
    "adam_step",
    "apply_dropout",
    "available_backends",
    "compare_gradients",
    "dense_backward",
    "dense_forward",
    "fit",
    "lstm_backward",
    "lstm_forward",
    "mse_loss",
    "numerical_gradient",
    "train_epoch",
]
